#include "glyphforge/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "glyphforge/attention.hpp"
#include "glyphforge/core/hash.hpp"
#include "glyphforge/core/image_io.hpp"
#include "glyphforge/core/kernels.hpp"

namespace glyphforge {

namespace fs = std::filesystem;

namespace {

std::unique_ptr<LLMBackend> make_llm(const RunConfig& cfg) {
    if (cfg.llm_backend == "external") return HttpLLMBackend::from_env();
    if (cfg.llm_backend != "fixture") {
        throw InvalidInput("unknown llm backend '" + cfg.llm_backend + "'");
    }
    if (!cfg.llm_fixture_file.empty()) {
        return std::make_unique<FixtureLLMBackend>(cfg.llm_fixture_file);
    }
    return std::make_unique<FixtureLLMBackend>();
}

std::unique_ptr<DetectorBackend> make_detector(const RunConfig& cfg) {
    if (cfg.backend == "external") {
        const char* url = std::getenv("GLYPHFORGE_DETECTOR_URL");
        if (url == nullptr || *url == '\0') {
            throw BackendUnavailable("GLYPHFORGE_DETECTOR_URL is not set");
        }
        return std::make_unique<HttpDetectorBackend>(url);
    }
    if (!cfg.detector_fixture_file.empty()) {
        return std::make_unique<ToyDetectorBackend>(cfg.detector_fixture_file);
    }
    return std::make_unique<ToyDetectorBackend>();
}

std::unique_ptr<DenoiserBackend> make_denoiser(const RunConfig& cfg,
                                               const DiffusionSchedule& schedule) {
    if (cfg.backend == "toy-analytic") {
        return std::make_unique<AnalyticGaussianBackend>(schedule, cfg.sigma0);
    }
    if (cfg.backend == "toy-micro") {
        if (cfg.size_px > 128) {
            throw InvalidInput("toy-micro attends over every latent cell; use --size <= 128");
        }
        return std::make_unique<MicroAttentionBackend>();
    }
    if (cfg.backend == "external") {
        const char* url = std::getenv("GLYPHFORGE_DENOISER_URL");
        if (url == nullptr || *url == '\0') {
            throw BackendUnavailable("GLYPHFORGE_DENOISER_URL is not set");
        }
        return std::make_unique<RemoteDenoiserBackend>(url);
    }
    throw InvalidInput("unknown backend '" + cfg.backend + "'");
}

struct ResolvedPrompts {
    std::vector<std::string> subjects;
    std::string surrounding;
    PromptSource source = PromptSource::manual;
};

ResolvedPrompts resolve_prompts(const RunConfig& cfg) {
    ResolvedPrompts r;
    const bool multi = !cfg.concepts.empty();
    if (multi) {
        r.subjects = cfg.concepts;
        r.source = PromptSource::manual;
        if (!cfg.surrounding_prompt.empty()) {
            r.surrounding = cfg.surrounding_prompt;
        } else {
            auto llm = make_llm(cfg);
            PromptPair p = acquire_prompts(cfg.character, *llm, QueryTemplate::standard());
            r.surrounding = p.surrounding_prompt;
        }
        return r;
    }
    if (!cfg.subject_prompt.empty() && !cfg.surrounding_prompt.empty()) {
        r.subjects = {cfg.subject_prompt};
        r.surrounding = cfg.surrounding_prompt;
        r.source = PromptSource::manual;
        return r;
    }
    auto llm = make_llm(cfg);
    PromptPair p = acquire_prompts(cfg.character, *llm, QueryTemplate::standard());
    r.subjects = {cfg.subject_prompt.empty() ? p.subject_prompt : cfg.subject_prompt};
    r.surrounding = cfg.surrounding_prompt.empty() ? p.surrounding_prompt : cfg.surrounding_prompt;
    r.source = p.source;
    return r;
}

std::vector<float> resolve_gammas(const RunConfig& cfg, size_t n) {
    std::vector<float> g = cfg.gammas;
    if (g.empty()) g.assign(n, cfg.gamma);
    if (g.size() == 1 && n > 1) g.assign(n, g[0]);
    if (g.size() != n) throw InvalidInput("gamma count does not match concept count");
    for (float v : g) {
        if (!(v > 0.0f && v <= 1.0f)) throw InvalidInput("gamma must lie in (0,1]");
    }
    return g;
}

// Latent-resolution masks: each cell goes to the concept with the largest
// area coverage (earlier concept on ties), claimed only when coverage >= 0.5.
// Reduces to plain area-average + threshold for a single mask, and guarantees
// disjointness for several.
std::vector<Tensor> downsample_masks(const std::vector<Tensor>& masks, int lat_h, int lat_w) {
    std::vector<Tensor> covers;
    for (const Tensor& m : masks) covers.push_back(kern::area_resample(m, lat_h, lat_w));
    std::vector<Tensor> out(masks.size(), Tensor(lat_h, lat_w, 1));
    for (int y = 0; y < lat_h; y++) {
        for (int x = 0; x < lat_w; x++) {
            int winner = -1;
            float best = 0.0f;
            for (size_t i = 0; i < covers.size(); i++) {
                float v = covers[i].at(y, x);
                if (v > best) {
                    best = v;
                    winner = static_cast<int>(i);
                }
            }
            if (winner >= 0 && best >= 0.5f) out[static_cast<size_t>(winner)].at(y, x) = 1.0f;
        }
    }
    return out;
}

DetectionBox bbox_of_mask(const Tensor& mask) {
    int min_x = mask.w, min_y = mask.h, max_x = -1, max_y = -1;
    for (int y = 0; y < mask.h; y++) {
        for (int x = 0; x < mask.w; x++) {
            if (mask.at(y, x) != 0.0f) {
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
            }
        }
    }
    DetectionBox b;
    if (max_x < 0) throw InvalidInput("injected mask is empty");
    b.x0 = static_cast<float>(min_x) / mask.w;
    b.x1 = static_cast<float>(max_x + 1) / mask.w;
    b.y0 = static_cast<float>(min_y) / mask.h;
    b.y1 = static_cast<float>(max_y + 1) / mask.h;
    b.confidence = 1.0f;
    b.phrase = "injected";
    return b;
}

nlohmann::ordered_json box_json(const DetectionBox& b, const char* origin) {
    nlohmann::ordered_json j;
    j["box"] = {b.x0, b.y0, b.x1, b.y1};
    j["score"] = b.confidence;
    j["phrase"] = b.phrase;
    j["origin"] = origin;
    return j;
}

}  // namespace

Tensor quantize8(const Tensor& t) {
    Tensor out(t.h, t.w, t.c);
    for (size_t i = 0; i < t.size(); i++) {
        float v = std::clamp(t.v[i], 0.0f, 1.0f);
        out.v[i] = static_cast<float>(std::lround(v * 255.0f)) / 255.0f;
    }
    return out;
}

void to_json(nlohmann::ordered_json& j, const RunConfig& c) {
    j = nlohmann::ordered_json{{"char", c.character},
                               {"font", c.font_id},
                               {"size_px", c.size_px},
                               {"subject_prompt", c.subject_prompt},
                               {"surrounding_prompt", c.surrounding_prompt},
                               {"concepts", c.concepts},
                               {"conf_min", c.thresholds.conf_min},
                               {"area_lo", c.thresholds.area_lo},
                               {"area_hi", c.thresholds.area_hi},
                               {"strength", c.strength_ds},
                               {"semtypo_steps", c.semtypo_steps},
                               {"control_scale_subject", c.cs_subject},
                               {"control_scale_surround", c.cs_surround},
                               {"gamma", c.gamma},
                               {"gammas", c.gammas},
                               {"alpha", c.alpha},
                               {"guidance_scale", c.guidance_scale},
                               {"steps", c.steps},
                               {"seed", c.seed},
                               {"sketch_sigma", c.sketch_sigma},
                               {"share_initial_noise", c.share_initial_noise},
                               {"attention", c.attention},
                               {"backend", c.backend},
                               {"sigma0", c.sigma0},
                               {"out", c.out_dir},
                               {"dump_intermediates", c.dump_intermediates},
                               {"llm_fixture_file", c.llm_fixture_file},
                               {"detector_fixture_file", c.detector_fixture_file},
                               {"llm_backend", c.llm_backend},
                               {"use_mask", c.use_mask_png},
                               {"use_subject_star", c.use_subject_star_pngs}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    get("char", c.character);
    get("font", c.font_id);
    get("size_px", c.size_px);
    get("subject_prompt", c.subject_prompt);
    get("surrounding_prompt", c.surrounding_prompt);
    get("concepts", c.concepts);
    get("conf_min", c.thresholds.conf_min);
    get("area_lo", c.thresholds.area_lo);
    get("area_hi", c.thresholds.area_hi);
    get("strength", c.strength_ds);
    get("semtypo_steps", c.semtypo_steps);
    get("control_scale_subject", c.cs_subject);
    get("control_scale_surround", c.cs_surround);
    get("gamma", c.gamma);
    get("gammas", c.gammas);
    get("alpha", c.alpha);
    get("guidance_scale", c.guidance_scale);
    get("steps", c.steps);
    get("seed", c.seed);
    get("sketch_sigma", c.sketch_sigma);
    get("share_initial_noise", c.share_initial_noise);
    get("attention", c.attention);
    get("backend", c.backend);
    get("sigma0", c.sigma0);
    get("out", c.out_dir);
    get("dump_intermediates", c.dump_intermediates);
    get("llm_fixture_file", c.llm_fixture_file);
    get("detector_fixture_file", c.detector_fixture_file);
    get("llm_backend", c.llm_backend);
    get("use_mask", c.use_mask_png);
    get("use_subject_star", c.use_subject_star_pngs);
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidInput("cannot open config file: " + path);
    nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
    if (j.is_discarded()) throw InvalidInput("config file is not valid JSON: " + path);
    // A manifest is also a valid config source: use its embedded config.
    if (j.contains("config")) j = j.at("config");
    RunConfig c;
    from_json(j, c);
    return c;
}

PromptPair run_prompts_stage(const RunConfig& cfg) {
    if (cfg.character.empty()) throw InvalidInput("prompts stage needs --char");
    if (!cfg.subject_prompt.empty() && !cfg.surrounding_prompt.empty()) {
        return PromptPair{cfg.subject_prompt, cfg.surrounding_prompt, PromptSource::manual};
    }
    auto llm = make_llm(cfg);
    return acquire_prompts(cfg.character, *llm, QueryTemplate::standard());
}

RegionStageResult run_regions_stage(const RunConfig& cfg) {
    if (cfg.character.empty()) throw InvalidInput("regions stage needs --char");
    RegionStageResult r;
    FontLibrary fonts;
    r.glyph = rasterize(cfg.character, fonts, cfg.font_id, cfg.size_px);

    ResolvedPrompts prompts = resolve_prompts(cfg);
    auto detector = make_detector(cfg);
    r.raw_boxes = detect(r.glyph, prompts.subjects[0], *detector);
    r.ranked_boxes = filter_and_rank(r.raw_boxes, cfg.thresholds.area_lo, cfg.thresholds.area_hi,
                                     cfg.thresholds.conf_min);
    std::vector<float> gammas = resolve_gammas(cfg, prompts.subjects.size());
    r.regions = select_regions_multi(r.glyph, prompts.subjects, *detector, cfg.thresholds, gammas);
    return r;
}

Tensor run_semtypo_stage(const RunConfig& cfg, const Tensor& subject_image,
                         const std::string& subject_prompt, int concept_index) {
    DiffusionSchedule schedule = make_schedule(1000, cfg.steps);
    auto denoiser = make_denoiser(cfg, schedule);
    if (auto* analytic = dynamic_cast<AnalyticGaussianBackend*>(denoiser.get())) {
        analytic->register_procedural_target(cond_id_for("semtypo", subject_prompt),
                                             subject_image.h, subject_image.w, 1);
    }
    SemTypoParams params;
    params.strength_ds = cfg.strength_ds;
    params.steps = cfg.semtypo_steps;
    params.seed = cfg.seed + static_cast<uint64_t>(concept_index);
    params.guidance_scale = cfg.guidance_scale;
    params.control_scale = cfg.cs_subject;
    return quantize8(sem_typo(subject_image, subject_prompt, params, *denoiser));
}

RunArtifacts run_generate(const RunConfig& cfg) {
    if (cfg.character.empty()) throw InvalidInput("generate needs --char");
    if (cfg.steps < 1) throw InvalidInput("steps must be >= 1");

    RunArtifacts art;
    art.out_dir = cfg.out_dir;
    fs::create_directories(cfg.out_dir);

    // Phase 1: prompts.
    ResolvedPrompts prompts = with_stage("knowledge", [&] { return resolve_prompts(cfg); });
    const size_t n_concepts = prompts.subjects.size();
    std::vector<float> gammas = resolve_gammas(cfg, n_concepts);

    // Phase 2: glyph + regions.
    FontLibrary fonts;
    GlyphImage glyph =
        with_stage("glyph", [&] { return rasterize(cfg.character, fonts, cfg.font_id, cfg.size_px); });

    auto detector = make_detector(cfg);
    MultiRegionSplit regions;
    if (!cfg.use_mask_png.empty()) {
        Tensor mask = kern::binarize(read_gray_png(cfg.use_mask_png), 0.5f);
        if (mask.h != glyph.pixels.h || mask.w != glyph.pixels.w) {
            throw ShapeError("injected mask size does not match the canvas");
        }
        RegionSplit s;
        s.mask = mask;
        s.box = bbox_of_mask(mask);
        s.origin = RegionOrigin::ranked;
        s.subject_image = Tensor(mask.h, mask.w, 1);
        s.surrounding_image = Tensor(mask.h, mask.w, 1);
        for (size_t p = 0; p < mask.size(); p++) {
            s.subject_image.v[p] = glyph.pixels.v[p] * mask.v[p];
            s.surrounding_image.v[p] = glyph.pixels.v[p] * (1.0f - mask.v[p]);
        }
        regions.splits.push_back(std::move(s));
        regions.gammas.push_back(gammas[0]);
        if (n_concepts != 1) throw InvalidInput("--use-mask supports a single concept");
    } else {
        regions = with_stage("region", [&] {
            return select_regions_multi(glyph, prompts.subjects, *detector, cfg.thresholds, gammas);
        });
    }

    // Phase 2b: subject deformation.
    std::vector<Tensor> subject_stars;
    for (size_t i = 0; i < n_concepts; i++) {
        if (i < cfg.use_subject_star_pngs.size() && !cfg.use_subject_star_pngs[i].empty()) {
            subject_stars.push_back(read_gray_png(cfg.use_subject_star_pngs[i]));
        } else {
            subject_stars.push_back(with_stage("semtypo", [&] {
                return run_semtypo_stage(cfg, regions.splits[i].subject_image, prompts.subjects[i],
                                         static_cast<int>(i));
            }));
        }
    }

    // Phase 3: compositional generation.
    DiffusionSchedule schedule = make_schedule(1000, cfg.steps);
    auto denoiser = make_denoiser(cfg, schedule);

    bool attention_on;
    if (cfg.attention == "on") {
        if (!denoiser->supports_hooks()) {
            throw CapabilityError("backend '" + cfg.backend + "' has no attention layers to hook");
        }
        attention_on = true;
    } else if (cfg.attention == "off") {
        attention_on = false;
    } else if (cfg.attention == "auto") {
        attention_on = denoiser->supports_hooks();
    } else {
        throw InvalidInput("attention must be one of auto|on|off");
    }

    const LatentShape lshape = denoiser->latent_shape(glyph.pixels.h, glyph.pixels.w);

    Tensor total_mask = combined_mask(regions, glyph.pixels.h, glyph.pixels.w);
    GlyphImage surround_glyph = glyph;
    for (size_t p = 0; p < total_mask.size(); p++) {
        surround_glyph.pixels.v[p] = glyph.pixels.v[p] * (1.0f - total_mask.v[p]);
    }

    std::vector<Tensor> image_masks;
    for (const RegionSplit& s : regions.splits) image_masks.push_back(s.mask);
    std::vector<Tensor> latent_masks = downsample_masks(image_masks, lshape.h, lshape.w);

    DualBranchConfig dual;
    dual.latent_h = lshape.h;
    dual.latent_w = lshape.w;
    dual.latent_c = lshape.c;
    for (size_t i = 0; i < n_concepts; i++) {
        BranchSpec b;
        b.cond_id = cond_id_for("sub", prompts.subjects[i]);
        b.control = to_segmentation(subject_stars[i]);
        b.control->conditioning_scale = cfg.cs_subject;
        b.control_scale = cfg.cs_subject;
        b.latent_mask = latent_masks[i];
        b.gamma = gammas[i];
        dual.subjects.push_back(std::move(b));
    }
    dual.surround.cond_id = cond_id_for("surr", prompts.surrounding);
    dual.surround.control = to_scribble(surround_glyph);
    dual.surround.control->conditioning_scale = cfg.cs_surround;
    dual.surround.control_scale = cfg.cs_surround;
    dual.fusion.alpha = cfg.alpha;
    dual.fusion.guidance_scale = cfg.guidance_scale;
    dual.fusion.seed = cfg.seed;
    dual.fusion.share_initial_noise = cfg.share_initial_noise;
    dual.fusion.cross_attention = attention_on;
    dual.fusion.control_fusion = attention_on;
    dual.fusion.sketch_sigma = cfg.sketch_sigma;

    if (auto* analytic = dynamic_cast<AnalyticGaussianBackend*>(denoiser.get())) {
        for (const BranchSpec& b : dual.subjects) {
            analytic->register_procedural_target(b.cond_id, lshape.h, lshape.w, lshape.c);
        }
        analytic->register_procedural_target(dual.surround.cond_id, lshape.h, lshape.w, lshape.c);
    }

    if (cfg.dump_intermediates) {
        fs::create_directories(fs::path(cfg.out_dir) / "steps");
        dual.on_step = [&](int pos, int /*t*/, const Tensor& sketch, const Tensor& fused) {
            if (sketch.size() == 0) return;
            char name[64];
            std::snprintf(name, sizeof(name), "steps/step_%03d_sketch.png", pos);
            write_gray_png((fs::path(cfg.out_dir) / name).string(), sketch);
            std::snprintf(name, sizeof(name), "steps/step_%03d_fused.png", pos);
            write_gray_png((fs::path(cfg.out_dir) / name).string(), fused);
        };
    }

    DualBranchResult result =
        with_stage("sampler", [&] { return run_dual_branch(dual, schedule, *denoiser); });
    art.final_image = result.image;

    // Artifacts + manifest.
    auto save = [&](const std::string& name, const Tensor& img) {
        std::string path = (fs::path(cfg.out_dir) / name).string();
        write_gray_png(path, img);
        art.written_files.push_back(name);
    };
    save("final.png", result.image);
    save("glyph.png", glyph.pixels);
    save("surrounding.png", surround_glyph.pixels);
    for (size_t i = 0; i < n_concepts; i++) {
        const std::string sfx = n_concepts == 1 ? "" : "_" + std::to_string(i);
        save("mask" + sfx + ".png", regions.splits[i].mask);
        save("subject" + sfx + ".png", regions.splits[i].subject_image);
        save("subject_star" + sfx + ".png", subject_stars[i]);
    }

    nlohmann::ordered_json m;
    m["tool"] = "glyphforge";
    m["char"] = cfg.character;
    m["font"] = cfg.font_id;
    m["size_px"] = cfg.size_px;
    nlohmann::ordered_json pj;
    pj["subjects"] = prompts.subjects;
    pj["surrounding"] = prompts.surrounding;
    pj["source"] = prompt_source_name(prompts.source);
    m["prompts"] = pj;
    nlohmann::ordered_json boxes = nlohmann::ordered_json::array();
    for (const RegionSplit& s : regions.splits) {
        boxes.push_back(box_json(s.box, region_origin_name(s.origin)));
    }
    m["boxes"] = boxes;
    m["thresholds"] = {{"conf_min", cfg.thresholds.conf_min},
                       {"area_lo", cfg.thresholds.area_lo},
                       {"area_hi", cfg.thresholds.area_hi}};
    m["params"] = {{"gammas", gammas},
                   {"alpha", cfg.alpha},
                   {"guidance_scale", cfg.guidance_scale},
                   {"strength", cfg.strength_ds},
                   {"semtypo_steps", cfg.semtypo_steps},
                   {"control_scale_subject", cfg.cs_subject},
                   {"control_scale_surround", cfg.cs_surround},
                   {"sketch_sigma", cfg.sketch_sigma},
                   {"share_initial_noise", cfg.share_initial_noise},
                   {"attention", attention_on ? "on" : "off"},
                   {"sigma0", cfg.sigma0}};
    m["schedule"] = {{"t_train", schedule.t_train},
                     {"inference_steps", schedule.inference_steps},
                     {"beta_start", schedule.beta_start},
                     {"beta_end", schedule.beta_end}};
    m["seed"] = cfg.seed;
    m["backends"] = {{"denoiser", denoiser->id()},
                     {"detector", detector->name()},
                     {"llm", cfg.llm_backend}};
    m["latent_shape"] = {lshape.h, lshape.w, lshape.c};
    nlohmann::ordered_json hashes;
    for (const std::string& f : art.written_files) {
        hashes[f] = hex64(fnv1a64(read_file_bytes((fs::path(cfg.out_dir) / f).string())));
    }
    m["artifacts"] = hashes;
    nlohmann::ordered_json cj;
    to_json(cj, cfg);
    m["config"] = cj;

    const std::string manifest_path = (fs::path(cfg.out_dir) / "manifest.json").string();
    std::ofstream mf(manifest_path, std::ios::trunc);
    mf << m.dump(2) << "\n";
    art.written_files.push_back("manifest.json");
    art.manifest = std::move(m);
    return art;
}

}  // namespace glyphforge
