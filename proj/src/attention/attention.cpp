#include "glyphforge/attention.hpp"

#include <cmath>

#include "glyphforge/core/errors.hpp"
#include "glyphforge/core/kernels.hpp"

namespace glyphforge {

std::pair<Tensor, Tensor> compute_qk(const Tensor& features, const Tensor& w_q, const Tensor& w_k) {
    return {kern::matmul(features, w_q), kern::matmul(features, w_k)};
}

Tensor mix_keys(const Tensor& k_surr, const Tensor& k_sub, float alpha) {
    if (alpha < 0.0f || alpha > 1.0f) throw InvalidInput("mix_keys: alpha must lie in [0,1]");
    return kern::lerp(k_surr, k_sub, alpha);
}

Tensor cross_branch_scores(const Tensor& q_surr, const Tensor& k_cross, int d_dim) {
    if (d_dim <= 0) throw InvalidInput("cross_branch_scores: d_dim must be positive");
    if (q_surr.w != k_cross.w) {
        throw ShapeError("cross_branch_scores: q and k feature dims differ");
    }
    // A = q . k^T / sqrt(d_dim)
    Tensor k_t(k_cross.w, k_cross.h, 1);
    for (int y = 0; y < k_cross.h; y++) {
        for (int x = 0; x < k_cross.w; x++) k_t.at(x, y) = k_cross.at(y, x);
    }
    return kern::matmul(q_surr, k_t, static_cast<float>(1.0 / std::sqrt(static_cast<double>(d_dim))));
}

Tensor aggregate_attention(std::span<const AttentionCapture> captures, int lat_h, int lat_w) {
    if (captures.empty()) throw InvalidInput("aggregate_attention: no captures");
    const int tokens = lat_h * lat_w;
    Tensor acc(1, tokens, 1);
    for (const AttentionCapture& cap : captures) {
        if (cap.raw_scores.h != tokens || cap.raw_scores.w != tokens) {
            throw ShapeError("aggregate_attention: capture token count does not match grid");
        }
        Tensor probs = kern::softmax_rows(cap.raw_scores);
        Tensor received = kern::column_sums(probs);
        for (int i = 0; i < tokens; i++) acc.at(0, i) += received.at(0, i);
    }
    Tensor map(lat_h, lat_w, 1);
    const float inv = 1.0f / static_cast<float>(captures.size());
    for (int y = 0; y < lat_h; y++) {
        for (int x = 0; x < lat_w; x++) map.at(y, x) = acc.at(0, y * lat_w + x) * inv;
    }
    return kern::minmax_normalize(map);
}

NeuralSketch neural_sketch(const Tensor& raw_map, float sigma, int out_h, int out_w) {
    for (float v : raw_map.v) {
        if (v < 0.0f || v > 1.0f) throw InvalidInput("neural_sketch: raw map outside [0,1]");
    }
    NeuralSketch s;
    s.sigma = sigma;
    Tensor up = kern::bilinear_resize(raw_map, out_h, out_w);
    if (sigma > 0.0f) up = kern::gaussian_blur(up, sigma);
    s.map = kern::minmax_normalize(up);
    return s;
}

ControlSignal fuse_control(const NeuralSketch& sketch, const ControlSignal& control) {
    require_same_shape(sketch.map, control.image, "fuse_control");
    ControlSignal fused;
    fused.kind = control.kind;
    fused.conditioning_scale = control.conditioning_scale;
    fused.image = kern::pixelwise_max(sketch.map, control.image);
    return fused;
}

}  // namespace glyphforge
