#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "glyphforge/core/errors.hpp"

namespace glyphforge {

// Dense float tensor, row-major, channel-last: index = (y * w + x) * c + ch.
// Images are h*w with c == 1; latents are h*w*c.
struct Tensor {
    int h = 0;
    int w = 0;
    int c = 1;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int h_, int w_, int c_ = 1, float fill = 0.0f)
        : h(h_), w(w_), c(c_), v(static_cast<size_t>(h_) * w_ * c_, fill) {
        if (h_ <= 0 || w_ <= 0 || c_ <= 0) {
            throw InvalidInput("tensor dimensions must be positive");
        }
    }

    size_t size() const { return v.size(); }

    float& at(int y, int x, int ch = 0) {
        return v[(static_cast<size_t>(y) * w + x) * c + ch];
    }
    float at(int y, int x, int ch = 0) const {
        return v[(static_cast<size_t>(y) * w + x) * c + ch];
    }

    bool same_shape(const Tensor& o) const { return h == o.h && w == o.w && c == o.c; }

    bool all_finite() const {
        for (float x : v) {
            if (!std::isfinite(x)) return false;
        }
        return true;
    }

    bool operator==(const Tensor& o) const {
        return h == o.h && w == o.w && c == o.c && v == o.v;
    }

    static Tensor full_like(const Tensor& t, float fill) {
        Tensor out(t.h, t.w, t.c, fill);
        return out;
    }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": shapes differ (" + std::to_string(a.h) + "x" +
                         std::to_string(a.w) + "x" + std::to_string(a.c) + " vs " +
                         std::to_string(b.h) + "x" + std::to_string(b.w) + "x" +
                         std::to_string(b.c) + ")");
    }
}

// Mask tensors are h*w with c == 1 and values in {0, 1}; they broadcast over
// the channel axis of the tensors they gate.
inline void require_mask_for(const Tensor& mask, const Tensor& t, const char* what) {
    if (mask.h != t.h || mask.w != t.w || mask.c != 1) {
        throw ShapeError(std::string(what) + ": mask must be " + std::to_string(t.h) + "x" +
                         std::to_string(t.w) + "x1");
    }
}

}  // namespace glyphforge
