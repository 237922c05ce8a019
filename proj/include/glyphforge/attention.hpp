#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "glyphforge/core/tensor.hpp"
#include "glyphforge/glyph.hpp"

namespace glyphforge {

// One attention layer's tensors for a single head at a single step. q/k rows
// are spatial tokens; raw_scores is the scaled pre-softmax q.k^T actually
// used by the layer (after any key substitution).
struct AttentionCapture {
    int layer_id = 0;
    int step_t = 0;
    Tensor q;           // tokens x d_dim
    Tensor k;           // tokens x d_dim
    Tensor raw_scores;  // tokens x tokens
    int head_count = 1;
    int d_dim = 0;
};

// Gaussian-smoothed aggregate of self-attention, in [0,1] at image resolution.
struct NeuralSketch {
    Tensor map;
    float sigma = 2.0f;
    std::vector<int> source_steps;
};

std::pair<Tensor, Tensor> compute_qk(const Tensor& features, const Tensor& w_q, const Tensor& w_k);

// k_cross = alpha * k_surr + (1 - alpha) * k_sub
Tensor mix_keys(const Tensor& k_surr, const Tensor& k_sub, float alpha);

// A = q . k^T / sqrt(d_dim); softmax is the caller's job.
Tensor cross_branch_scores(const Tensor& q_surr, const Tensor& k_cross, int d_dim);

// Per capture: softmax rows, column-sum (attention received per token), then
// mean over all captures (heads and layers together), reshape to the latent
// grid, min-max normalize. A flat map normalizes to all zeros.
Tensor aggregate_attention(std::span<const AttentionCapture> captures, int lat_h, int lat_w);

NeuralSketch neural_sketch(const Tensor& raw_map, float sigma, int out_h, int out_w);

// I_fused(p) = max(S_neur(p), I_control(p)); kind and scale preserved.
ControlSignal fuse_control(const NeuralSketch& sketch, const ControlSignal& control);

}  // namespace glyphforge
