#include "glyphforge/sampler.hpp"

#include <deque>

#include "glyphforge/attention.hpp"
#include "glyphforge/core/rng.hpp"

namespace glyphforge {

Tensor ddim_step(const Tensor& x_t, const Tensor& eps_hat, int t, int t_prev,
                 const DiffusionSchedule& schedule) {
    if (t <= t_prev) throw InvalidInput("ddim_step: need t > t_prev");
    return kern::ddim_step(x_t, eps_hat, schedule.abar(t), schedule.abar(t_prev));
}

namespace {

void validate_branch(const BranchSpec& b, int h, int w, bool is_subject) {
    if (b.cond_id.empty()) throw InvalidInput("sampler: branch cond_id must not be empty");
    if (is_subject) {
        if (b.latent_mask.h != h || b.latent_mask.w != w || b.latent_mask.c != 1) {
            throw ShapeError("sampler: subject latent_mask must match latent resolution");
        }
        if (!(b.gamma > 0.0f && b.gamma <= 1.0f)) {
            throw InvalidInput("sampler: gamma must lie in (0,1]");
        }
    }
    if (b.control_scale < 0.0f) throw InvalidInput("sampler: control scale must be >= 0");
}

const ControlSignal* control_ptr(const std::optional<ControlSignal>& c) {
    return c.has_value() ? &*c : nullptr;
}

// Label each latent cell with the subject concept whose mask is nearest
// (multi-source BFS; earlier concepts win ties). Used to pick which branch's
// keys a querying token absorbs in multi-concept runs.
std::vector<int> nearest_concept_labels(const std::vector<BranchSpec>& subjects, int h, int w) {
    std::vector<int> label(static_cast<size_t>(h) * w, -1);
    std::deque<int> queue;
    for (size_t i = 0; i < subjects.size(); i++) {
        const Tensor& m = subjects[i].latent_mask;
        for (int p = 0; p < h * w; p++) {
            if (m.v[p] == 1.0f && label[p] < 0) {
                label[p] = static_cast<int>(i);
                queue.push_back(p);
            }
        }
    }
    while (!queue.empty()) {
        int p = queue.front();
        queue.pop_front();
        int y = p / w, x = p % w;
        const int ny[4] = {y - 1, y + 1, y, y};
        const int nx[4] = {x, x, x - 1, x + 1};
        for (int k = 0; k < 4; k++) {
            if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) continue;
            int np = ny[k] * w + nx[k];
            if (label[np] < 0) {
                label[np] = label[p];
                queue.push_back(np);
            }
        }
    }
    for (int& l : label) {
        if (l < 0) l = 0;  // no mask at all: fall back to the first concept
    }
    return label;
}

std::map<int, Tensor> gather_injected_keys(const std::vector<std::map<int, Tensor>>& per_subject,
                                           const std::vector<int>& labels) {
    std::map<int, Tensor> injected;
    if (per_subject.size() == 1) return per_subject[0];
    for (const auto& [layer, k0] : per_subject[0]) {
        Tensor k(k0.h, k0.w, 1);
        for (int tok = 0; tok < k0.h; tok++) {
            const Tensor& src = per_subject[static_cast<size_t>(labels[tok])].at(layer);
            for (int d = 0; d < k0.w; d++) k.at(tok, d) = src.at(tok, d);
        }
        injected[layer] = std::move(k);
    }
    return injected;
}

void check_finite(const Tensor& t, int step_index, const char* what) {
    if (!t.all_finite()) {
        throw NumericalError(std::string(what) + " contains NaN/Inf at step index " +
                             std::to_string(step_index));
    }
}

}  // namespace

Tensor run_guided(const GuidedConfig& cfg, const DiffusionSchedule& schedule,
                  DenoiserBackend& backend) {
    if (cfg.start_pos < 0 || cfg.start_pos > schedule.inference_steps) {
        throw InvalidInput("run_guided: start_pos outside schedule");
    }
    Tensor x;
    if (cfg.x_start.has_value()) {
        x = *cfg.x_start;
    } else {
        GaussianRng rng(cfg.seed);
        x = rng.normal(cfg.shape.h, cfg.shape.w, cfg.shape.c);
    }
    for (int pos = cfg.start_pos; pos < schedule.inference_steps; pos++) {
        const int t = schedule.t_at(pos);
        const int t_prev = schedule.t_at(pos + 1);
        Tensor eps_cond =
            backend.predict_noise(x, t, cfg.cond_id, control_ptr(cfg.control), cfg.control_scale);
        Tensor eps_uc = backend.predict_noise(x, t, kUnconditionalId, nullptr, 0.0f);
        Tensor eps_hat = harmonize(eps_uc, eps_cond, cfg.guidance_scale);
        x = ddim_step(x, eps_hat, t, t_prev, schedule);
        check_finite(x, pos, "latent");
    }
    return x;
}

DualBranchResult run_dual_branch(const DualBranchConfig& cfg, const DiffusionSchedule& schedule,
                                 DenoiserBackend& backend) {
    const int h = cfg.latent_h, w = cfg.latent_w, c = cfg.latent_c;
    if (h <= 0 || w <= 0 || c <= 0) throw InvalidInput("run_dual_branch: bad latent shape");
    if (cfg.subjects.empty()) throw InvalidInput("run_dual_branch: need at least one subject");
    for (const BranchSpec& b : cfg.subjects) validate_branch(b, h, w, true);
    validate_branch(cfg.surround, h, w, false);
    if (!(cfg.fusion.alpha >= 0.0f && cfg.fusion.alpha <= 1.0f)) {
        throw InvalidInput("run_dual_branch: alpha must lie in [0,1]");
    }

    const bool want_hooks = cfg.fusion.cross_attention || cfg.fusion.control_fusion;
    if (want_hooks && !backend.supports_hooks()) {
        throw CapabilityError("backend '" + backend.id() + "' cannot run attention features");
    }

    const size_t n_sub = cfg.subjects.size();
    std::vector<Tensor> masks;
    std::vector<float> gammas;
    for (const BranchSpec& b : cfg.subjects) {
        masks.push_back(b.latent_mask);
        gammas.push_back(b.gamma);
    }

    // Shared-eps_T mode: every branch starts from the same draw and, because
    // each step applies the same fused noise, the trajectories stay equal; the
    // ablation gives each branch an independent initial latent instead.
    GaussianRng rng(cfg.fusion.seed);
    Tensor eps_T = rng.normal(h, w, c);
    std::vector<Tensor> x_subs(n_sub, eps_T);
    Tensor x_surr = eps_T;
    if (!cfg.fusion.share_initial_noise) {
        for (size_t i = 0; i < n_sub; i++) x_subs[i] = rng.normal(h, w, c);
        x_surr = rng.normal(h, w, c);
    }

    std::vector<int> labels;
    if (cfg.fusion.cross_attention && n_sub > 1) {
        labels = nearest_concept_labels(cfg.subjects, h, w);
    }

    const ControlSignal* surr_pristine = control_ptr(cfg.surround.control);
    ControlSignal surr_active;
    bool have_fused = false;

    DualBranchResult result;
    std::vector<Tensor> eps_subs(n_sub);

    for (int pos = 0; pos < schedule.inference_steps; pos++) {
        const int t = schedule.t_at(pos);
        const int t_prev = schedule.t_at(pos + 1);

        // Subject passes (capture keys when the surround will query them).
        std::vector<std::map<int, Tensor>> subject_keys(n_sub);
        for (size_t i = 0; i < n_sub; i++) {
            std::shared_ptr<AttentionHookSession> session;
            if (cfg.fusion.cross_attention) {
                session = backend.install_hooks({});
                session->reset_pass(t);
            }
            eps_subs[i] = backend.predict_noise(x_subs[i], t, cfg.subjects[i].cond_id,
                                                control_ptr(cfg.subjects[i].control),
                                                cfg.subjects[i].control_scale);
            if (session) {
                subject_keys[i] = session->full_keys;
                backend.remove_hooks();
            }
        }

        // Surrounding pass with cross-branch key substitution and capture.
        std::shared_ptr<AttentionHookSession> surr_session;
        if (want_hooks) {
            HookConfig hc;
            hc.capture = cfg.fusion.control_fusion;
            if (cfg.fusion.cross_attention) hc.mix_alpha = cfg.fusion.alpha;
            surr_session = backend.install_hooks(hc);
            surr_session->reset_pass(t);
            if (cfg.fusion.cross_attention) {
                surr_session->injected_keys =
                    n_sub == 1 ? subject_keys[0] : gather_injected_keys(subject_keys, labels);
            }
        }
        const ControlSignal* surr_ctrl = have_fused ? &surr_active : surr_pristine;
        Tensor eps_surr = backend.predict_noise(x_surr, t, cfg.surround.cond_id, surr_ctrl,
                                                cfg.surround.control_scale);
        std::vector<AttentionCapture> captures;
        if (surr_session) {
            captures = std::move(surr_session->captures);
            backend.remove_hooks();
        }

        // One shared unconditional prediction per step.
        Tensor eps_uc = backend.predict_noise(x_surr, t, kUnconditionalId, nullptr, 0.0f);

        Tensor eps_overall = fuse_noise_multi(eps_subs, masks, gammas, eps_surr);
        Tensor eps_hat = harmonize(eps_uc, eps_overall, cfg.fusion.guidance_scale);
        check_finite(eps_hat, pos, "fused noise");

        for (size_t i = 0; i < n_sub; i++) {
            x_subs[i] = ddim_step(x_subs[i], eps_hat, t, t_prev, schedule);
            check_finite(x_subs[i], pos, "subject latent");
        }
        x_surr = ddim_step(x_surr, eps_hat, t, t_prev, schedule);
        check_finite(x_surr, pos, "surround latent");

        // Attention-driven control fusion: the sketch from this step's capture
        // feeds the next step, always fused against the pristine control.
        Tensor sketch_map;
        if (cfg.fusion.control_fusion && !captures.empty() && surr_pristine != nullptr) {
            Tensor raw = aggregate_attention(captures, h, w);
            NeuralSketch sk = neural_sketch(raw, cfg.fusion.sketch_sigma, surr_pristine->image.h,
                                            surr_pristine->image.w);
            surr_active = fuse_control(sk, *surr_pristine);
            have_fused = true;
            sketch_map = std::move(sk.map);
        }
        if (cfg.on_step) {
            cfg.on_step(pos, t, sketch_map, have_fused ? surr_active.image : Tensor{});
        }
        result.steps_run++;
    }

    // Mask composite of the branch latents (a no-op when trajectories are
    // shared and therefore identical).
    Tensor composite(h, w, c);
    for (int y = 0; y < h; y++) {
        for (int x = 0; x < w; x++) {
            float covered = 0.0f;
            for (size_t i = 0; i < n_sub; i++) covered += masks[i].at(y, x);
            for (int ch = 0; ch < c; ch++) {
                float acc = 0.0f;
                for (size_t i = 0; i < n_sub; i++) {
                    acc += masks[i].at(y, x) * x_subs[i].at(y, x, ch);
                }
                composite.at(y, x, ch) = acc + (1.0f - covered) * x_surr.at(y, x, ch);
            }
        }
    }

    result.final_latent = std::move(composite);
    result.image = kern::clip01(backend.decode(result.final_latent));
    return result;
}

}  // namespace glyphforge
