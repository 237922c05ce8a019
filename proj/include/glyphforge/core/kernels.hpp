#pragma once

#include <span>
#include <vector>

#include "glyphforge/core/tensor.hpp"

// Data-parallel tensor kernels. The kern:: entry points are OpenMP-parallel;
// kern::serial:: holds plain-loop reference implementations with identical
// per-element arithmetic. Every kernel keeps a fixed evaluation order per
// output element, so the two variants (and any thread count) agree bitwise —
// tests assert exact equality and tools/gf_bench compares throughput.
namespace glyphforge::kern {

// eps_overall = gamma * M * eps_sub + (1 - M) * eps_surr, mask broadcast over channels.
Tensor fuse_noise(const Tensor& eps_sub, const Tensor& eps_surr, const Tensor& mask, float gamma);

// eps_overall = sum_i gamma_i * M_i * eps_sub_i + (1 - sum_i M_i) * eps_surr.
// Masks must be pairwise disjoint; throws InvariantViolation otherwise.
Tensor fuse_noise_multi(std::span<const Tensor> eps_subs, std::span<const Tensor> masks,
                        std::span<const float> gammas, const Tensor& eps_surr);

// eps_hat = eps_uc + s * (eps_overall - eps_uc)
Tensor harmonize(const Tensor& eps_uc, const Tensor& eps_overall, float s);

// Deterministic DDIM update (eta = 0). abar_prev == 1 encodes the final step
// to x_0. Element math in double, stored as float.
Tensor ddim_step(const Tensor& x_t, const Tensor& eps_hat, double abar_t, double abar_prev);

// Forward noising: x_t = sqrt(abar) * x0 + sqrt(1 - abar) * eps.
Tensor add_noise(const Tensor& x0, const Tensor& eps, double abar);

// out = alpha * a + (1 - alpha) * b
Tensor lerp(const Tensor& a, const Tensor& b, float alpha);

// C = A * B for 2D tensors (c == 1), optionally scaled: C = scale * A * B.
Tensor matmul(const Tensor& a, const Tensor& b, float scale = 1.0f);

// Row-wise softmax of a 2D tensor, double accumulation.
Tensor softmax_rows(const Tensor& scores);

// Column sums of a 2D tensor: attention received per key token. Returns 1 x w.
Tensor column_sums(const Tensor& m);

// Separable Gaussian blur, kernel truncated at 3 sigma and renormalized at the
// borders. sigma <= 0 is the identity.
Tensor gaussian_blur(const Tensor& img, float sigma);

Tensor bilinear_resize(const Tensor& img, int out_h, int out_w);

// Box/area-average downsample (exact for integer and fractional ratios).
Tensor area_resample(const Tensor& img, int out_h, int out_w);

// Min-max normalize to [0,1]; a flat input maps to all zeros.
Tensor minmax_normalize(const Tensor& img);

Tensor pixelwise_max(const Tensor& a, const Tensor& b);

Tensor clip01(const Tensor& t);

Tensor binarize(const Tensor& t, float threshold);

namespace serial {
Tensor fuse_noise(const Tensor& eps_sub, const Tensor& eps_surr, const Tensor& mask, float gamma);
Tensor fuse_noise_multi(std::span<const Tensor> eps_subs, std::span<const Tensor> masks,
                        std::span<const float> gammas, const Tensor& eps_surr);
Tensor harmonize(const Tensor& eps_uc, const Tensor& eps_overall, float s);
Tensor ddim_step(const Tensor& x_t, const Tensor& eps_hat, double abar_t, double abar_prev);
Tensor add_noise(const Tensor& x0, const Tensor& eps, double abar);
Tensor lerp(const Tensor& a, const Tensor& b, float alpha);
Tensor matmul(const Tensor& a, const Tensor& b, float scale = 1.0f);
Tensor softmax_rows(const Tensor& scores);
Tensor column_sums(const Tensor& m);
Tensor gaussian_blur(const Tensor& img, float sigma);
Tensor bilinear_resize(const Tensor& img, int out_h, int out_w);
Tensor area_resample(const Tensor& img, int out_h, int out_w);
Tensor minmax_normalize(const Tensor& img);
Tensor pixelwise_max(const Tensor& a, const Tensor& b);
Tensor clip01(const Tensor& t);
Tensor binarize(const Tensor& t, float threshold);
}  // namespace serial

}  // namespace glyphforge::kern
