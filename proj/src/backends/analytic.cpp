#include <cmath>

#include "glyphforge/backends.hpp"
#include "glyphforge/core/hash.hpp"
#include "glyphforge/core/kernels.hpp"
#include "glyphforge/core/rng.hpp"

namespace glyphforge {

std::string cond_id_for(const std::string& role, const std::string& prompt) {
    return role + "|" + prompt;
}

AnalyticGaussianBackend::AnalyticGaussianBackend(DiffusionSchedule schedule, double sigma0)
    : schedule_(std::move(schedule)), sigma0_(sigma0) {
    if (!(sigma0 > 0.0)) throw InvalidInput("AnalyticGaussianBackend: sigma0 must be positive");
}

void AnalyticGaussianBackend::register_target(const std::string& cond_id, Tensor mu) {
    mu_table_[cond_id] = std::move(mu);
}

void AnalyticGaussianBackend::register_procedural_target(const std::string& cond_id, int h, int w,
                                                         int c) {
    // Smooth deterministic field seeded from the id: noise, heavy blur,
    // min-max to [0,1].
    GaussianRng rng(fnv1a64(cond_id));
    Tensor noise = rng.normal(h, w, c);
    Tensor smooth = kern::gaussian_blur(noise, std::max(1.0f, std::min(h, w) / 8.0f));
    mu_table_[cond_id] = kern::minmax_normalize(smooth);
}

bool AnalyticGaussianBackend::has_target(const std::string& cond_id) const {
    return mu_table_.count(cond_id) > 0;
}

Tensor AnalyticGaussianBackend::predict_noise(const Tensor& x_t, int t, const std::string& cond_id,
                                              const ControlSignal* control, float cs) {
    if (!x_t.all_finite()) throw InvalidInput("predict_noise: latent contains NaN/Inf");
    if (t < 0 || t >= schedule_.t_train) {
        throw InvalidInput("predict_noise: timestep outside schedule range");
    }

    Tensor mu;
    if (cond_id == kUnconditionalId) {
        mu = Tensor(x_t.h, x_t.w, x_t.c, 0.0f);  // designated neutral target
    } else {
        auto it = mu_table_.find(cond_id);
        if (it == mu_table_.end()) {
            throw InvalidInput("predict_noise: unknown cond_id '" + cond_id + "'");
        }
        mu = it->second;
        if (!mu.same_shape(x_t)) {
            throw ShapeError("predict_noise: registered target shape does not match latent");
        }
    }

    // Control pulls the effective target: mu_eff = mu + cs * (control - mu).
    if (control != nullptr && cs != 0.0f) {
        Tensor ctrl = kern::area_resample(control->image, x_t.h, x_t.w);
        for (int y = 0; y < x_t.h; y++) {
            for (int x = 0; x < x_t.w; x++) {
                float cv = ctrl.at(y, x);
                for (int ch = 0; ch < x_t.c; ch++) {
                    float m = mu.at(y, x, ch);
                    mu.at(y, x, ch) = m + cs * (cv - m);
                }
            }
        }
    }

    // Exact Gaussian posterior score for data ~ N(mu, sigma0^2 I):
    //   eps_hat = sqrt(1-abar) / (abar*sigma0^2 + 1-abar) * (x_t - sqrt(abar)*mu)
    const double abar = schedule_.abar(t);
    const double v = 1.0 - abar;
    const double denom = abar * sigma0_ * sigma0_ + v;
    const double coeff = std::sqrt(v) / denom;
    const double sqrt_abar = std::sqrt(abar);

    Tensor eps(x_t.h, x_t.w, x_t.c);
    const int64_t n = static_cast<int64_t>(eps.size());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; i++) {
        eps.v[i] = static_cast<float>(coeff * (static_cast<double>(x_t.v[i]) - sqrt_abar * mu.v[i]));
    }
    return eps;
}

}  // namespace glyphforge
