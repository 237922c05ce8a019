#include "glyphforge/semtypo.hpp"

#include <cmath>

#include "glyphforge/core/kernels.hpp"
#include "glyphforge/core/rng.hpp"
#include "glyphforge/glyph.hpp"
#include "glyphforge/sampler.hpp"

namespace glyphforge {

int semtypo_steps_for_strength(float ds, int steps) {
    int k = static_cast<int>(std::ceil(static_cast<double>(ds) * steps));
    return std::clamp(k, 0, steps);
}

Tensor sem_typo(const Tensor& i_sub, const std::string& p_sub, const SemTypoParams& params,
                DenoiserBackend& backend) {
    if (!(params.strength_ds >= 0.0f && params.strength_ds <= 1.0f)) {
        throw InvalidInput("sem_typo: strength must lie in [0,1]");
    }
    if (params.steps < 1) throw InvalidInput("sem_typo: steps must be >= 1");
    for (float v : i_sub.v) {
        if (v < 0.0f || v > 1.0f) throw InvalidInput("sem_typo: input image outside [0,1]");
    }

    Tensor x0 = backend.encode(i_sub);
    const int k = semtypo_steps_for_strength(params.strength_ds, params.steps);
    if (k == 0) {
        return kern::clip01(backend.decode(x0));
    }

    DiffusionSchedule schedule = make_schedule(1000, params.steps);
    const int start_pos = params.steps - k;
    const int t_start = schedule.t_at(start_pos);

    GaussianRng rng(params.seed);
    Tensor eps = rng.normal(x0.h, x0.w, x0.c);
    Tensor x_t = kern::add_noise(x0, eps, schedule.abar(t_start));

    ControlSignal depth;
    depth.kind = ControlKind::depth;
    depth.image = i_sub;  // ink near (1), background far (0)
    depth.conditioning_scale = params.control_scale;

    GuidedConfig cfg;
    cfg.cond_id = cond_id_for("semtypo", p_sub);
    cfg.control = depth;
    cfg.control_scale = params.control_scale;
    cfg.guidance_scale = params.guidance_scale;
    cfg.start_pos = start_pos;
    cfg.x_start = std::move(x_t);
    cfg.shape = {x0.h, x0.w, x0.c};

    Tensor latent = run_guided(cfg, schedule, backend);
    return kern::clip01(backend.decode(latent));
}

}  // namespace glyphforge
