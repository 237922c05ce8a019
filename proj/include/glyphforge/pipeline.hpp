#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "glyphforge/backends.hpp"
#include "glyphforge/glyph.hpp"
#include "glyphforge/knowledge.hpp"
#include "glyphforge/region.hpp"
#include "glyphforge/sampler.hpp"
#include "glyphforge/semtypo.hpp"

namespace glyphforge {

// Everything one generation run depends on. CLI flags override config-file
// values which override these defaults; the manifest embeds the resolved copy.
struct RunConfig {
    std::string character;
    std::string font_id = FontLibrary::default_font_id();
    int size_px = 512;

    std::string subject_prompt;    // manual override (skips the LLM)
    std::string surrounding_prompt;
    std::vector<std::string> concepts;  // multi-concept subject prompts

    FilterThresholds thresholds;

    float strength_ds = 0.85f;
    int semtypo_steps = 30;
    float cs_subject = 1.0f;
    float cs_surround = 1.0f;

    float gamma = 0.8f;
    std::vector<float> gammas;  // per-concept override
    float alpha = 0.5f;
    float guidance_scale = 7.5f;
    int steps = 50;
    uint64_t seed = 0;
    float sketch_sigma = 2.0f;
    bool share_initial_noise = true;
    std::string attention = "auto";  // auto | on | off

    std::string backend = "toy-analytic";  // toy-analytic | toy-micro | external
    double sigma0 = 0.05;                  // toy-analytic data spread

    std::string out_dir = "out";
    bool dump_intermediates = false;

    std::string llm_fixture_file;
    std::string detector_fixture_file;
    std::string llm_backend = "fixture";  // fixture | external

    // Stage-injection inputs for chaining the stage commands.
    std::string use_mask_png;
    std::vector<std::string> use_subject_star_pngs;
};

void to_json(nlohmann::ordered_json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);
RunConfig load_config_file(const std::string& path);

struct RunArtifacts {
    std::string out_dir;
    Tensor final_image;
    std::vector<std::string> written_files;
    nlohmann::ordered_json manifest;
};

// Stage results used by the stage commands.
struct RegionStageResult {
    GlyphImage glyph;
    std::vector<DetectionBox> raw_boxes;
    std::vector<DetectionBox> ranked_boxes;
    MultiRegionSplit regions;
};

PromptPair run_prompts_stage(const RunConfig& cfg);
RegionStageResult run_regions_stage(const RunConfig& cfg);
Tensor run_semtypo_stage(const RunConfig& cfg, const Tensor& subject_image,
                         const std::string& subject_prompt, int concept_index = 0);

// The full three-phase run. Writes final.png, per-concept masks and deformed
// subjects, and manifest.json under cfg.out_dir.
RunArtifacts run_generate(const RunConfig& cfg);

// Quantize to the 8-bit grid the PNG codec uses, so in-memory tensors match
// their on-disk round trip and stage chaining is byte-exact.
Tensor quantize8(const Tensor& t);

}  // namespace glyphforge
