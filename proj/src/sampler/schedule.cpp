#include "glyphforge/schedule.hpp"

#include <cmath>

namespace glyphforge {

DiffusionSchedule make_schedule(int t_train, int inference_steps, double beta_start,
                                double beta_end) {
    if (t_train < 1) throw InvalidInput("make_schedule: t_train must be >= 1");
    if (inference_steps < 1 || inference_steps > t_train) {
        throw InvalidInput("make_schedule: inference_steps must lie in [1, t_train]");
    }
    if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end)) {
        throw InvalidInput("make_schedule: bad beta range");
    }

    DiffusionSchedule s;
    s.t_train = t_train;
    s.inference_steps = inference_steps;
    s.beta_start = beta_start;
    s.beta_end = beta_end;

    // Scaled-linear: interpolate sqrt(beta), square, accumulate the product.
    const double b0 = std::sqrt(beta_start);
    const double b1 = std::sqrt(beta_end);
    s.alphas_bar.resize(t_train);
    double prod = 1.0;
    for (int i = 0; i < t_train; i++) {
        double frac = t_train > 1 ? static_cast<double>(i) / (t_train - 1) : 0.0;
        double beta = (b0 + (b1 - b0) * frac) * (b0 + (b1 - b0) * frac);
        prod *= 1.0 - beta;
        s.alphas_bar[i] = prod;
    }

    const int stride = t_train / inference_steps;
    s.timestep_indices.resize(inference_steps);
    for (int k = 0; k < inference_steps; k++) {
        s.timestep_indices[k] = stride * (inference_steps - 1 - k);
    }
    return s;
}

}  // namespace glyphforge
