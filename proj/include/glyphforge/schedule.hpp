#pragma once

#include <vector>

#include "glyphforge/core/errors.hpp"

namespace glyphforge {

// Scaled-linear beta schedule and the decreasing subsequence of training
// timesteps visited at inference. abar(-1) == 1 encodes the clean endpoint.
struct DiffusionSchedule {
    int t_train = 1000;
    std::vector<double> alphas_bar;   // strictly decreasing, in (0,1]
    int inference_steps = 50;
    std::vector<int> timestep_indices;  // strictly decreasing, first = max
    double beta_start = 0.00085;
    double beta_end = 0.012;

    double abar(int t) const {
        if (t < 0) return 1.0;
        return alphas_bar.at(static_cast<size_t>(t));
    }

    // Training timestep at inference position i; one past the end maps to -1.
    int t_at(int pos) const {
        if (pos == inference_steps) return -1;
        return timestep_indices.at(static_cast<size_t>(pos));
    }
};

DiffusionSchedule make_schedule(int t_train = 1000, int inference_steps = 50,
                                double beta_start = 0.00085, double beta_end = 0.012);

}  // namespace glyphforge
