#pragma once

// Internal helpers shared by the OpenMP and serial kernel variants. The
// per-element arithmetic lives here exactly once so the two loop structures
// cannot drift apart numerically.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "glyphforge/core/errors.hpp"
#include "glyphforge/core/tensor.hpp"

namespace glyphforge::kern::detail {

inline void check_mask_binary(const Tensor& mask, const char* what) {
    for (float m : mask.v) {
        if (m != 0.0f && m != 1.0f) {
            throw InvalidInput(std::string(what) + ": mask must be binary");
        }
    }
}

inline void check_fuse_args(const Tensor& eps_sub, const Tensor& eps_surr, const Tensor& mask) {
    require_same_shape(eps_sub, eps_surr, "fuse_noise");
    require_mask_for(mask, eps_sub, "fuse_noise");
    check_mask_binary(mask, "fuse_noise");
}

inline void check_fuse_multi_args(std::span<const Tensor> eps_subs, std::span<const Tensor> masks,
                                  std::span<const float> gammas, const Tensor& eps_surr) {
    if (eps_subs.empty() || eps_subs.size() != masks.size() || eps_subs.size() != gammas.size()) {
        throw InvalidInput("fuse_noise_multi: need equal nonzero counts of noises, masks, gammas");
    }
    for (size_t i = 0; i < eps_subs.size(); i++) {
        require_same_shape(eps_subs[i], eps_surr, "fuse_noise_multi");
        require_mask_for(masks[i], eps_surr, "fuse_noise_multi");
        check_mask_binary(masks[i], "fuse_noise_multi");
    }
    // Pairwise disjoint <=> per-pixel sum of binary masks <= 1.
    const size_t n = masks[0].size();
    for (size_t p = 0; p < n; p++) {
        float s = 0.0f;
        for (const Tensor& m : masks) s += m.v[p];
        if (s > 1.0f) throw InvariantViolation("fuse_noise_multi: masks overlap");
    }
}

inline float fuse_cell(float a, float b, float m, float gamma) {
    return gamma * m * a + (1.0f - m) * b;
}

inline float harmonize_cell(float uc, float overall, double s) {
    double u = uc;
    return static_cast<float>(u + s * (static_cast<double>(overall) - u));
}

struct DdimCoeffs {
    double sqrt_abar_t;
    double sqrt_one_minus_abar_t;
    double sqrt_abar_prev;
    double sqrt_one_minus_abar_prev;
    bool final_step;
};

inline DdimCoeffs ddim_coeffs(double abar_t, double abar_prev) {
    if (!(abar_t > 0.0 && abar_t <= 1.0) || !(abar_prev > 0.0 && abar_prev <= 1.0)) {
        throw InvalidInput("ddim_step: abar values must lie in (0,1]");
    }
    DdimCoeffs c;
    c.sqrt_abar_t = std::sqrt(abar_t);
    c.sqrt_one_minus_abar_t = std::sqrt(1.0 - abar_t);
    c.sqrt_abar_prev = std::sqrt(abar_prev);
    c.sqrt_one_minus_abar_prev = std::sqrt(1.0 - abar_prev);
    c.final_step = abar_prev == 1.0;
    return c;
}

inline float ddim_cell(float x_t, float eps, const DdimCoeffs& c) {
    double x0_hat = (static_cast<double>(x_t) - c.sqrt_one_minus_abar_t * eps) / c.sqrt_abar_t;
    if (c.final_step) return static_cast<float>(x0_hat);
    return static_cast<float>(c.sqrt_abar_prev * x0_hat + c.sqrt_one_minus_abar_prev * eps);
}

inline float add_noise_cell(float x0, float eps, double sa, double sv) {
    return static_cast<float>(sa * x0 + sv * eps);
}

// Truncated Gaussian taps; weights sum to 1 over the full kernel. Border
// pixels renormalize over the in-bounds taps.
inline std::vector<double> gaussian_taps(float sigma, int* radius_out) {
    int radius = std::max(1, static_cast<int>(std::ceil(3.0f * sigma)));
    std::vector<double> taps(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; i++) {
        double t = std::exp(-0.5 * (static_cast<double>(i) * i) / (static_cast<double>(sigma) * sigma));
        taps[i + radius] = t;
        sum += t;
    }
    for (double& t : taps) t /= sum;
    *radius_out = radius;
    return taps;
}

struct LinearTap {
    int i0, i1;
    double w0, w1;
};

// Half-pixel-center sampling; equal sizes reduce to the identity.
inline LinearTap bilinear_tap(int out_i, int out_n, int in_n) {
    double src = (out_i + 0.5) * (static_cast<double>(in_n) / out_n) - 0.5;
    double f = std::floor(src);
    LinearTap t;
    t.i0 = std::clamp(static_cast<int>(f), 0, in_n - 1);
    t.i1 = std::clamp(t.i0 + 1, 0, in_n - 1);
    t.w1 = std::clamp(src - f, 0.0, 1.0);
    t.w0 = 1.0 - t.w1;
    return t;
}

// Overlap of output cell [o*scale, (o+1)*scale) with input cell [i, i+1).
inline double area_overlap(int i, int o, double scale) {
    double lo = std::max(static_cast<double>(i), o * scale);
    double hi = std::min(static_cast<double>(i + 1), (o + 1) * scale);
    return std::max(0.0, hi - lo);
}

inline void check_2d(const Tensor& t, const char* what) {
    if (t.c != 1) throw ShapeError(std::string(what) + ": expected a 2D tensor (c == 1)");
}

inline void check_matmul(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul");
    check_2d(b, "matmul");
    if (a.w != b.h) {
        throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.w) + " vs " +
                         std::to_string(b.h) + ")");
    }
}

}  // namespace glyphforge::kern::detail
