// glyphforge CLI: generate | regions | prompts | semtypo.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "glyphforge/core/image_io.hpp"
#include "glyphforge/pipeline.hpp"

namespace fs = std::filesystem;
using namespace glyphforge;

namespace {

// --config is applied before flag binding so CLI flags override file values.
RunConfig preload_config(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; i++) {
        if (std::string(argv[i]) == "--config") {
            return load_config_file(argv[i + 1]);
        }
    }
    return RunConfig{};
}

void add_common_options(CLI::App* cmd, RunConfig& cfg) {
    std::string config_path;  // consumed by preload_config; kept for --help
    cmd->add_option("--config", config_path, "JSON config file (or a manifest) with defaults");
    cmd->add_option("--char", cfg.character, "input character or word");
    cmd->add_option("--font", cfg.font_id, "font id or path (resolved via GLYPHFORGE_FONT_DIR)");
    cmd->add_option("--size", cfg.size_px, "canvas size in pixels");
    cmd->add_option("--subject-prompt", cfg.subject_prompt, "manual subject prompt");
    cmd->add_option("--surrounding-prompt", cfg.surrounding_prompt, "manual surrounding prompt");
    cmd->add_option("--concepts", cfg.concepts, "multi-concept subject prompts");
    cmd->add_option("--conf-min", cfg.thresholds.conf_min, "detection confidence threshold");
    cmd->add_option("--area-lo", cfg.thresholds.area_lo, "min box/canvas area ratio");
    cmd->add_option("--area-hi", cfg.thresholds.area_hi, "max box/canvas area ratio");
    cmd->add_option("--strength", cfg.strength_ds, "deformation strength DS in [0,1]");
    cmd->add_option("--semtypo-steps", cfg.semtypo_steps, "deformation denoising steps");
    cmd->add_option("--gamma", cfg.gammas, "subject prominence (repeat for per-concept values)");
    cmd->add_option("--alpha", cfg.alpha, "cross-branch key mix in [0,1]");
    cmd->add_option("--guidance-scale", cfg.guidance_scale, "guidance scale s");
    cmd->add_option("--control-scale", cfg.cs_subject, "subject control conditioning scale (CS)");
    cmd->add_option("--control-scale-surround", cfg.cs_surround, "surround control scale");
    cmd->add_option("--steps", cfg.steps, "inference steps");
    cmd->add_option("--seed", cfg.seed, "random seed");
    cmd->add_option("--backend", cfg.backend, "toy-analytic | toy-micro | external");
    cmd->add_option("--sigma0", cfg.sigma0, "toy-analytic data spread");
    cmd->add_option("--sketch-sigma", cfg.sketch_sigma, "neural sketch smoothing radius (px)");
    cmd->add_option("--attention", cfg.attention, "attention features: auto | on | off");
    cmd->add_flag("!--no-shared-noise", cfg.share_initial_noise,
                  "draw independent initial noise per branch (ablation)");
    cmd->add_option("--out", cfg.out_dir, "output directory");
    cmd->add_flag("--dump-intermediates", cfg.dump_intermediates,
                  "write per-step sketch/fused-control previews");
    cmd->add_option("--llm-fixtures", cfg.llm_fixture_file, "LLM fixture JSON file");
    cmd->add_option("--detector-fixtures", cfg.detector_fixture_file, "detector fixture JSON file");
    cmd->add_option("--llm-backend", cfg.llm_backend, "fixture | external");
    cmd->add_option("--use-mask", cfg.use_mask_png, "inject a subject mask PNG (skips detection)");
    cmd->add_option("--use-subject-star", cfg.use_subject_star_pngs,
                    "inject deformed subject PNG(s) (skips SemTypo)");
}

int cmd_generate(const RunConfig& cfg) {
    RunArtifacts art = run_generate(cfg);
    std::printf("wrote %zu artifacts to %s\n", art.written_files.size(), art.out_dir.c_str());
    for (const std::string& f : art.written_files) std::printf("  %s\n", f.c_str());
    return 0;
}

int cmd_prompts(const RunConfig& cfg) {
    PromptPair p = run_prompts_stage(cfg);
    nlohmann::ordered_json j;
    j["subject prompt"] = p.subject_prompt;
    j["surrounding prompt"] = p.surrounding_prompt;
    j["source"] = prompt_source_name(p.source);
    std::printf("%s\n", j.dump(2).c_str());
    if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        std::ofstream f(fs::path(cfg.out_dir) / "prompts.json");
        f << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_regions(const RunConfig& cfg) {
    RegionStageResult r = run_regions_stage(cfg);
    std::printf("raw boxes: %zu, passing filters: %zu\n", r.raw_boxes.size(),
                r.ranked_boxes.size());
    std::printf("%-4s %-6s %-6s %-27s %s\n", "rank", "conf", "area", "box [x0,y0,x1,y1]", "phrase");
    int rank = 1;
    for (const DetectionBox& b : r.ranked_boxes) {
        std::printf("%-4d %-6.3f %-6.3f [%.3f,%.3f,%.3f,%.3f]     %s\n", rank++, b.confidence,
                    b.area(), b.x0, b.y0, b.x1, b.y1, b.phrase.c_str());
    }
    for (const RegionSplit& s : r.regions.splits) {
        if (s.origin != RegionOrigin::ranked) {
            std::printf("note: no box passed the filters; %s fallback used\n",
                        region_origin_name(s.origin));
        }
    }

    fs::create_directories(cfg.out_dir);
    nlohmann::ordered_json boxes = nlohmann::ordered_json::array();
    for (size_t i = 0; i < r.regions.splits.size(); i++) {
        const RegionSplit& s = r.regions.splits[i];
        const std::string sfx = r.regions.splits.size() == 1 ? "" : "_" + std::to_string(i);
        write_gray_png((fs::path(cfg.out_dir) / ("mask" + sfx + ".png")).string(), s.mask);
        write_gray_png((fs::path(cfg.out_dir) / ("subject" + sfx + ".png")).string(),
                       s.subject_image);
        write_gray_png((fs::path(cfg.out_dir) / ("surrounding" + sfx + ".png")).string(),
                       s.surrounding_image);
        nlohmann::ordered_json bj;
        bj["box"] = {s.box.x0, s.box.y0, s.box.x1, s.box.y1};
        bj["score"] = s.box.confidence;
        bj["phrase"] = s.box.phrase;
        bj["origin"] = region_origin_name(s.origin);
        boxes.push_back(bj);
    }
    std::ofstream f(fs::path(cfg.out_dir) / "boxes.json");
    f << boxes.dump(2) << "\n";
    std::printf("previews written to %s\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_semtypo(const RunConfig& cfg, const std::string& in_subject) {
    if (in_subject.empty()) throw InvalidInput("semtypo needs --in-subject <png>");
    if (cfg.subject_prompt.empty()) throw InvalidInput("semtypo needs --subject-prompt");
    Tensor subject = read_gray_png(in_subject);
    Tensor star = run_semtypo_stage(cfg, subject, cfg.subject_prompt);
    fs::create_directories(cfg.out_dir);
    const std::string out = (fs::path(cfg.out_dir) / "subject_star.png").string();
    write_gray_png(out, star);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"glyphforge: dual-branch artistic typography pipeline"};
    app.require_subcommand(1);

    RunConfig cfg;
    try {
        cfg = preload_config(argc, argv);
    } catch (const Error& e) {
        std::fprintf(stderr, "glyphforge: %s\n", e.what());
        return 2;
    }

    std::string in_subject;

    CLI::App* generate = app.add_subcommand("generate", "run the full three-phase pipeline");
    add_common_options(generate, cfg);

    CLI::App* regions = app.add_subcommand("regions", "detect and rank subject regions only");
    add_common_options(regions, cfg);

    CLI::App* prompts = app.add_subcommand("prompts", "acquire subject/surrounding prompts only");
    add_common_options(prompts, cfg);

    CLI::App* semtypo = app.add_subcommand("semtypo", "deform a subject image only");
    add_common_options(semtypo, cfg);
    semtypo->add_option("--in-subject", in_subject, "subject image PNG to deform");

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return cmd_generate(cfg);
        if (regions->parsed()) return cmd_regions(cfg);
        if (prompts->parsed()) return cmd_prompts(cfg);
        if (semtypo->parsed()) return cmd_semtypo(cfg, in_subject);
    } catch (const Error& e) {
        std::fprintf(stderr, "glyphforge: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "glyphforge: error: %s\n", e.what());
        return 1;
    }
    return 0;
}
