#include <cmath>

#include "glyphforge/backends.hpp"
#include "glyphforge/core/hash.hpp"
#include "glyphforge/core/kernels.hpp"
#include "glyphforge/core/rng.hpp"

namespace glyphforge {

namespace {

Tensor init_weight(GaussianRng& rng, int rows, int cols) {
    Tensor w(rows, cols, 1);
    const float scale = 1.0f / std::sqrt(static_cast<float>(rows));
    for (float& v : w.v) v = rng.next() * scale;
    return w;
}

// Head slice of a tokens x d_model matrix: columns [head*dh, (head+1)*dh).
Tensor head_slice(const Tensor& m, int head, int dh) {
    Tensor out(m.h, dh, 1);
    for (int y = 0; y < m.h; y++) {
        for (int x = 0; x < dh; x++) out.at(y, x) = m.at(y, head * dh + x);
    }
    return out;
}

}  // namespace

MicroAttentionBackend::MicroAttentionBackend() : MicroAttentionBackend(Config{}) {}

MicroAttentionBackend::MicroAttentionBackend(Config cfg) : cfg_(cfg) {
    if (cfg_.d_model <= 0 || cfg_.heads <= 0 || cfg_.layers < 2 || cfg_.channels <= 0) {
        throw InvalidInput("MicroAttentionBackend: need d_model/heads/channels > 0 and >= 2 layers");
    }
    if (cfg_.d_model % cfg_.heads != 0) {
        throw InvalidInput("MicroAttentionBackend: d_model must be divisible by heads");
    }
    GaussianRng rng(cfg_.seed);
    const int in_dim = cfg_.channels + 4 /*t*/ + 2 /*cond*/ + 1 /*control*/ + 1 /*kind*/;
    w_in_ = init_weight(rng, in_dim, cfg_.d_model);
    for (int l = 0; l < cfg_.layers; l++) {
        Layer layer;
        layer.w_q = init_weight(rng, cfg_.d_model, cfg_.d_model);
        layer.w_k = init_weight(rng, cfg_.d_model, cfg_.d_model);
        layer.w_v = init_weight(rng, cfg_.d_model, cfg_.d_model);
        layer.w_o = init_weight(rng, cfg_.d_model, cfg_.d_model);
        layers_.push_back(std::move(layer));
    }
    w_out_ = init_weight(rng, cfg_.d_model, cfg_.channels);
}

Tensor MicroAttentionBackend::encode(const Tensor& image) const {
    if (cfg_.channels == 1) return image;
    Tensor latent(image.h, image.w, cfg_.channels);
    for (int y = 0; y < image.h; y++) {
        for (int x = 0; x < image.w; x++) {
            for (int c = 0; c < cfg_.channels; c++) latent.at(y, x, c) = image.at(y, x);
        }
    }
    return latent;
}

Tensor MicroAttentionBackend::decode(const Tensor& latent) const {
    if (cfg_.channels == 1) return latent;
    Tensor image(latent.h, latent.w, 1);
    for (int y = 0; y < latent.h; y++) {
        for (int x = 0; x < latent.w; x++) image.at(y, x) = latent.at(y, x, 0);
    }
    return image;
}

Tensor MicroAttentionBackend::lift_features(const Tensor& x_t, int t, const std::string& cond_id,
                                            const ControlSignal* control, float cs) const {
    const int tokens = x_t.h * x_t.w;
    const int in_dim = w_in_.h;
    Tensor feats(tokens, in_dim, 1);

    const float t01 = static_cast<float>(t) / 1000.0f;
    const uint64_t ch = fnv1a64(cond_id);
    const float cond_a = static_cast<float>(ch & 0xffff) / 65535.0f;
    const float cond_b = static_cast<float>((ch >> 16) & 0xffff) / 65535.0f;

    Tensor ctrl;
    float kind_feat = 0.0f;
    if (control != nullptr && cs != 0.0f) {
        ctrl = kern::area_resample(control->image, x_t.h, x_t.w);
        kind_feat = (static_cast<float>(control->kind) + 1.0f) / 4.0f;
    }

    for (int y = 0; y < x_t.h; y++) {
        for (int x = 0; x < x_t.w; x++) {
            const int tok = y * x_t.w + x;
            int f = 0;
            for (int c = 0; c < x_t.c; c++) feats.at(tok, f++) = x_t.at(y, x, c);
            feats.at(tok, f++) = std::sin(t01 * 6.2831853f);
            feats.at(tok, f++) = std::cos(t01 * 6.2831853f);
            feats.at(tok, f++) = std::sin(t01 * 25.132741f);
            feats.at(tok, f++) = std::cos(t01 * 25.132741f);
            feats.at(tok, f++) = cond_a;
            feats.at(tok, f++) = cond_b;
            feats.at(tok, f++) = ctrl.size() ? cs * ctrl.at(y, x) : 0.0f;
            feats.at(tok, f++) = kind_feat;
        }
    }

    Tensor lifted = kern::matmul(feats, w_in_);
    for (float& v : lifted.v) v = std::tanh(v);
    return lifted;
}

Tensor MicroAttentionBackend::predict_noise(const Tensor& x_t, int t, const std::string& cond_id,
                                            const ControlSignal* control, float cs) {
    if (!x_t.all_finite()) throw InvalidInput("predict_noise: latent contains NaN/Inf");
    if (x_t.c != cfg_.channels) {
        throw ShapeError("predict_noise: latent channels do not match backend config");
    }
    const int tokens = x_t.h * x_t.w;
    const int dh = head_dim();
    const float score_scale = static_cast<float>(1.0 / std::sqrt(static_cast<double>(dh)));

    AttentionHookSession* hooks = session_.get();

    Tensor f = lift_features(x_t, t, cond_id, control, cs);
    for (int l = 0; l < cfg_.layers; l++) {
        const Layer& layer = layers_[l];
        Tensor q = kern::matmul(f, layer.w_q);
        Tensor k_self = kern::matmul(f, layer.w_k);
        Tensor v = kern::matmul(f, layer.w_v);

        Tensor k_used = k_self;
        if (hooks != nullptr) {
            hooks->full_keys[l] = k_self;
            if (hooks->config.mix_alpha.has_value()) {
                auto it = hooks->injected_keys.find(l);
                if (it != hooks->injected_keys.end()) {
                    k_used = kern::lerp(k_self, it->second, *hooks->config.mix_alpha);
                }
            }
        }

        Tensor attn_out(tokens, cfg_.d_model, 1);
        for (int hd = 0; hd < cfg_.heads; hd++) {
            Tensor qh = head_slice(q, hd, dh);
            Tensor kh = head_slice(k_used, hd, dh);
            Tensor vh = head_slice(v, hd, dh);

            Tensor kh_t(dh, tokens, 1);
            for (int y = 0; y < tokens; y++) {
                for (int x = 0; x < dh; x++) kh_t.at(x, y) = kh.at(y, x);
            }
            Tensor scores = kern::matmul(qh, kh_t, score_scale);

            if (hooks != nullptr && hooks->config.capture) {
                AttentionCapture cap;
                cap.layer_id = l;
                cap.step_t = hooks->step_t;
                cap.q = qh;
                cap.k = kh;
                cap.raw_scores = scores;
                cap.head_count = cfg_.heads;
                cap.d_dim = dh;
                hooks->captures.push_back(std::move(cap));
            }

            Tensor probs = kern::softmax_rows(scores);
            Tensor oh = kern::matmul(probs, vh);
            for (int y = 0; y < tokens; y++) {
                for (int x = 0; x < dh; x++) attn_out.at(y, hd * dh + x) = oh.at(y, x);
            }
        }

        Tensor projected = kern::matmul(attn_out, layer.w_o);
        for (size_t i = 0; i < f.size(); i++) f.v[i] += projected.v[i];  // residual
    }

    Tensor out_flat = kern::matmul(f, w_out_);
    Tensor eps(x_t.h, x_t.w, x_t.c);
    for (int y = 0; y < x_t.h; y++) {
        for (int x = 0; x < x_t.w; x++) {
            for (int c = 0; c < x_t.c; c++) eps.at(y, x, c) = out_flat.at(y * x_t.w + x, c);
        }
    }
    return eps;
}

std::shared_ptr<AttentionHookSession> MicroAttentionBackend::install_hooks(const HookConfig& config) {
    session_ = std::make_shared<AttentionHookSession>();
    session_->config = config;
    return session_;
}

void MicroAttentionBackend::remove_hooks() { session_.reset(); }

}  // namespace glyphforge
