#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "glyphforge/backends.hpp"
#include "glyphforge/core/kernels.hpp"
#include "glyphforge/core/tensor.hpp"
#include "glyphforge/schedule.hpp"

namespace glyphforge {

// Noise-space composition (module-level surface; the math lives in kern::).
using kern::fuse_noise;
using kern::fuse_noise_multi;
using kern::harmonize;

// One deterministic DDIM update along the schedule. t_prev == -1 is the final
// step and returns the x_0 estimate.
Tensor ddim_step(const Tensor& x_t, const Tensor& eps_hat, int t, int t_prev,
                 const DiffusionSchedule& schedule);

struct BranchSpec {
    std::string cond_id;
    std::optional<ControlSignal> control;
    float control_scale = 1.0f;
    Tensor latent_mask;  // subject branches: binary, latent resolution
    float gamma = 0.8f;
};

struct FusionParams {
    float alpha = 0.5f;           // cross-branch key mix
    float guidance_scale = 7.5f;  // s
    uint64_t seed = 0;
    bool share_initial_noise = true;  // ablation switch
    bool cross_attention = false;     // key substitution into the surround pass
    bool control_fusion = false;      // neural sketch max-fused into the surround control
    float sketch_sigma = 2.0f;
};

struct DualBranchConfig {
    std::vector<BranchSpec> subjects;  // N >= 1
    BranchSpec surround;               // mask/gamma unused
    FusionParams fusion;
    int latent_h = 0, latent_w = 0, latent_c = 1;
    // Debug tap, called after each step with the current sketch + fused control
    // (empty tensors when control fusion is off).
    std::function<void(int step_index, int t, const Tensor& sketch, const Tensor& fused_control)>
        on_step;
};

struct DualBranchResult {
    Tensor final_latent;
    Tensor image;  // decoded, clipped to [0,1]
    int steps_run = 0;
};

// The compositional engine: shared initial noise, per-branch predictions on
// the same latent, masked noise fusion, shared-unconditional harmonization,
// DDIM update. With share_initial_noise off, every branch evolves its own
// trajectory from an independent draw and the final latent is the mask
// composite of the branch latents.
DualBranchResult run_dual_branch(const DualBranchConfig& cfg, const DiffusionSchedule& schedule,
                                 DenoiserBackend& backend);

// Plain guided sampling of one branch (also the SemTypo inner loop). Starts
// from x_start at inference position start_pos; start_pos 0 with no x_start
// draws the initial noise from the seed.
struct GuidedConfig {
    std::string cond_id;
    std::optional<ControlSignal> control;
    float control_scale = 1.0f;
    float guidance_scale = 7.5f;
    uint64_t seed = 0;
    int start_pos = 0;
    std::optional<Tensor> x_start;
    LatentShape shape;
};

Tensor run_guided(const GuidedConfig& cfg, const DiffusionSchedule& schedule,
                  DenoiserBackend& backend);

}  // namespace glyphforge
