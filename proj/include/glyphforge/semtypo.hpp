#pragma once

#include <string>

#include "glyphforge/backends.hpp"
#include "glyphforge/core/tensor.hpp"
#include "glyphforge/schedule.hpp"

namespace glyphforge {

// Geometry deformation of the subject image: partial forward noising to a
// strength-dependent timestep, then depth-conditioned guided denoising.
struct SemTypoParams {
    float strength_ds = 0.85f;
    int steps = 30;
    uint64_t seed = 0;
    float guidance_scale = 7.5f;
    float control_scale = 1.0f;
};

// Number of denoising iterations run for a strength: ceil(ds * steps).
int semtypo_steps_for_strength(float ds, int steps);

Tensor sem_typo(const Tensor& i_sub, const std::string& p_sub, const SemTypoParams& params,
                DenoiserBackend& backend);

}  // namespace glyphforge
