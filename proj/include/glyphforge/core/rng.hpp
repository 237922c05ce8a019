#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "glyphforge/core/tensor.hpp"

namespace glyphforge {

// Deterministic Gaussian source. Box-Muller over mt19937_64 so that a seed
// produces the same byte-exact sequence on every platform; the standard
// library's normal_distribution is implementation-defined and would break
// the byte-identical-artifact guarantees.
class GaussianRng {
public:
    explicit GaussianRng(uint64_t seed) : engine_(seed) {}

    float next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0,1], u2 in [0,1)
        double u1 = (static_cast<double>(engine_()) + 1.0) * kInv64;
        double u2 = static_cast<double>(engine_()) * kInv64;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = static_cast<float>(r * std::sin(a));
        have_spare_ = true;
        return static_cast<float>(r * std::cos(a));
    }

    void fill(Tensor& t) {
        for (float& x : t.v) x = next();
    }

    Tensor normal(int h, int w, int c = 1) {
        Tensor t(h, w, c);
        fill(t);
        return t;
    }

    // Uniform in [0,1).
    double uniform() { return static_cast<double>(engine_()) * kInv64; }

private:
    static constexpr double kInv64 = 1.0 / 18446744073709551616.0;  // 2^-64
    std::mt19937_64 engine_;
    float spare_ = 0.0f;
    bool have_spare_ = false;
};

}  // namespace glyphforge
