#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "glyphforge/attention.hpp"
#include "glyphforge/core/tensor.hpp"
#include "glyphforge/glyph.hpp"
#include "glyphforge/schedule.hpp"

namespace glyphforge {

// Reserved conditioning id: a neutral, prompt-free prediction.
inline const std::string kUnconditionalId = "uncond";

// Stable conditioning id for a (role, prompt) pair; shared by the pipeline,
// the backends and the tests so registered targets line up.
std::string cond_id_for(const std::string& role, const std::string& prompt);

struct HookConfig {
    bool capture = false;
    // Key substitution is active when set: k_used = alpha*k_self + (1-alpha)*k_injected.
    std::optional<float> mix_alpha;
};

// Per-pass hook state. The sampler installs a session, runs one forward pass,
// then reads captures/full_keys; sessions are never shared across runs.
struct AttentionHookSession {
    HookConfig config;
    int step_t = 0;
    std::map<int, Tensor> injected_keys;      // layer -> full k (tokens x d_model)
    std::map<int, Tensor> full_keys;          // layer -> self k from the last pass
    std::vector<AttentionCapture> captures;   // per (layer, head)

    void reset_pass(int t) {
        step_t = t;
        full_keys.clear();
        captures.clear();
    }
};

struct LatentShape {
    int h = 0, w = 0, c = 1;
};

// Contract for every denoiser: pure predictions (bitwise repeatable for equal
// arguments), an encode/decode codec, and optionally an attention hook
// registry. Implementations must tolerate concurrent hook-free predictions.
class DenoiserBackend {
public:
    virtual ~DenoiserBackend() = default;

    virtual std::string id() const = 0;
    virtual LatentShape latent_shape(int image_h, int image_w) const = 0;
    virtual Tensor encode(const Tensor& image) const = 0;
    virtual Tensor decode(const Tensor& latent) const = 0;

    // control may be null; cs scales its influence (0 = ignored).
    virtual Tensor predict_noise(const Tensor& x_t, int t, const std::string& cond_id,
                                 const ControlSignal* control, float cs) = 0;

    virtual bool supports_hooks() const { return false; }
    virtual std::shared_ptr<AttentionHookSession> install_hooks(const HookConfig&) {
        throw CapabilityError(id() + " does not support attention hooks");
    }
    virtual void remove_hooks() {}
};

// Exactly solvable oracle backend: data ~ N(mu, sigma0^2 I) per conditioning
// id, prediction is the closed-form posterior score. No attention layers.
class AnalyticGaussianBackend : public DenoiserBackend {
public:
    AnalyticGaussianBackend(DiffusionSchedule schedule, double sigma0);

    void register_target(const std::string& cond_id, Tensor mu);
    // Deterministic smooth pseudo-random target derived from the id.
    void register_procedural_target(const std::string& cond_id, int h, int w, int c);
    bool has_target(const std::string& cond_id) const;

    std::string id() const override { return "toy-analytic"; }
    LatentShape latent_shape(int image_h, int image_w) const override {
        return {image_h, image_w, 1};
    }
    Tensor encode(const Tensor& image) const override { return image; }
    Tensor decode(const Tensor& latent) const override { return latent; }
    Tensor predict_noise(const Tensor& x_t, int t, const std::string& cond_id,
                         const ControlSignal* control, float cs) override;

    double sigma0() const { return sigma0_; }
    const DiffusionSchedule& schedule() const { return schedule_; }

private:
    DiffusionSchedule schedule_;
    double sigma0_;
    std::map<std::string, Tensor> mu_table_;
};

// Tiny fixed-seed network with real self-attention layers over the latent
// token grid; identity codec. Exists to exercise the hook paths with genuine
// attention tensors.
class MicroAttentionBackend : public DenoiserBackend {
public:
    struct Config {
        int d_model = 16;
        int heads = 2;
        int layers = 2;
        int channels = 1;
        uint64_t seed = 0x67f0a11ce5eedULL;
    };

    MicroAttentionBackend();
    explicit MicroAttentionBackend(Config cfg);

    std::string id() const override { return "toy-micro"; }
    LatentShape latent_shape(int image_h, int image_w) const override {
        return {image_h, image_w, cfg_.channels};
    }
    Tensor encode(const Tensor& image) const override;
    Tensor decode(const Tensor& latent) const override;
    Tensor predict_noise(const Tensor& x_t, int t, const std::string& cond_id,
                         const ControlSignal* control, float cs) override;

    bool supports_hooks() const override { return true; }
    std::shared_ptr<AttentionHookSession> install_hooks(const HookConfig& config) override;
    void remove_hooks() override;

    int layer_count() const { return cfg_.layers; }
    int head_dim() const { return cfg_.d_model / cfg_.heads; }
    const Config& config() const { return cfg_; }

    // Layer weights exposed for test-side recomputation of layer math.
    const Tensor& w_q(int layer) const { return layers_[layer].w_q; }
    const Tensor& w_k(int layer) const { return layers_[layer].w_k; }

private:
    struct Layer {
        Tensor w_q, w_k, w_v, w_o;  // d_model x d_model
    };

    Tensor lift_features(const Tensor& x_t, int t, const std::string& cond_id,
                         const ControlSignal* control, float cs) const;

    Config cfg_;
    Tensor w_in_;   // in_dim x d_model
    Tensor w_out_;  // d_model x channels
    std::vector<Layer> layers_;
    std::shared_ptr<AttentionHookSession> session_;
};

// HTTP adapter for an external denoiser service (GLYPHFORGE_DENOISER_URL).
// Request/response carry latents as base64 row-major float32 plus the shape.
class RemoteDenoiserBackend : public DenoiserBackend {
public:
    RemoteDenoiserBackend(std::string url, int timeout_ms = 30000);

    std::string id() const override { return "external"; }
    LatentShape latent_shape(int image_h, int image_w) const override;
    Tensor encode(const Tensor& image) const override;
    Tensor decode(const Tensor& latent) const override;
    Tensor predict_noise(const Tensor& x_t, int t, const std::string& cond_id,
                         const ControlSignal* control, float cs) override;

private:
    std::string url_;
    int timeout_ms_;
};

}  // namespace glyphforge
