#include "glyphforge/core/kernels.hpp"

#include "kernels_common.hpp"

// Plain-loop reference implementations. Kept deliberately simple; the test
// suite checks the OpenMP variants against these bitwise.

namespace glyphforge::kern::serial {

using namespace detail;

Tensor fuse_noise(const Tensor& eps_sub, const Tensor& eps_surr, const Tensor& mask, float gamma) {
    check_fuse_args(eps_sub, eps_surr, mask);
    Tensor out(eps_sub.h, eps_sub.w, eps_sub.c);
    for (size_t i = 0; i < out.size(); i++) {
        out.v[i] = fuse_cell(eps_sub.v[i], eps_surr.v[i], mask.v[i / out.c], gamma);
    }
    return out;
}

Tensor fuse_noise_multi(std::span<const Tensor> eps_subs, std::span<const Tensor> masks,
                        std::span<const float> gammas, const Tensor& eps_surr) {
    check_fuse_multi_args(eps_subs, masks, gammas, eps_surr);
    Tensor out(eps_surr.h, eps_surr.w, eps_surr.c);
    for (size_t i = 0; i < out.size(); i++) {
        const size_t p = i / out.c;
        float acc = 0.0f;
        float mask_sum = 0.0f;
        for (size_t j = 0; j < eps_subs.size(); j++) {
            float m = masks[j].v[p];
            acc += gammas[j] * m * eps_subs[j].v[i];
            mask_sum += m;
        }
        out.v[i] = acc + (1.0f - mask_sum) * eps_surr.v[i];
    }
    return out;
}

Tensor harmonize(const Tensor& eps_uc, const Tensor& eps_overall, float s) {
    require_same_shape(eps_uc, eps_overall, "harmonize");
    Tensor out(eps_uc.h, eps_uc.w, eps_uc.c);
    for (size_t i = 0; i < out.size(); i++) {
        out.v[i] = harmonize_cell(eps_uc.v[i], eps_overall.v[i], s);
    }
    return out;
}

Tensor ddim_step(const Tensor& x_t, const Tensor& eps_hat, double abar_t, double abar_prev) {
    require_same_shape(x_t, eps_hat, "ddim_step");
    const DdimCoeffs cf = ddim_coeffs(abar_t, abar_prev);
    Tensor out(x_t.h, x_t.w, x_t.c);
    for (size_t i = 0; i < out.size(); i++) {
        out.v[i] = ddim_cell(x_t.v[i], eps_hat.v[i], cf);
    }
    return out;
}

Tensor add_noise(const Tensor& x0, const Tensor& eps, double abar) {
    require_same_shape(x0, eps, "add_noise");
    const double sa = std::sqrt(abar);
    const double sv = std::sqrt(1.0 - abar);
    Tensor out(x0.h, x0.w, x0.c);
    for (size_t i = 0; i < out.size(); i++) {
        out.v[i] = add_noise_cell(x0.v[i], eps.v[i], sa, sv);
    }
    return out;
}

Tensor lerp(const Tensor& a, const Tensor& b, float alpha) {
    require_same_shape(a, b, "lerp");
    Tensor out(a.h, a.w, a.c);
    for (size_t i = 0; i < out.size(); i++) {
        out.v[i] = alpha * a.v[i] + (1.0f - alpha) * b.v[i];
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b, float scale) {
    check_matmul(a, b);
    Tensor out(a.h, b.w, 1);
    for (int y = 0; y < a.h; y++) {
        for (int x = 0; x < b.w; x++) {
            double acc = 0.0;
            for (int k = 0; k < a.w; k++) {
                acc += static_cast<double>(a.at(y, k)) * b.at(k, x);
            }
            out.at(y, x) = static_cast<float>(acc * scale);
        }
    }
    return out;
}

Tensor softmax_rows(const Tensor& scores) {
    check_2d(scores, "softmax_rows");
    Tensor out(scores.h, scores.w, 1);
    for (int y = 0; y < scores.h; y++) {
        float mx = scores.at(y, 0);
        for (int x = 1; x < scores.w; x++) mx = std::max(mx, scores.at(y, x));
        double sum = 0.0;
        for (int x = 0; x < scores.w; x++) {
            double e = std::exp(static_cast<double>(scores.at(y, x)) - mx);
            out.at(y, x) = static_cast<float>(e);
            sum += e;
        }
        for (int x = 0; x < scores.w; x++) {
            out.at(y, x) = static_cast<float>(out.at(y, x) / sum);
        }
    }
    return out;
}

Tensor column_sums(const Tensor& m) {
    check_2d(m, "column_sums");
    Tensor out(1, m.w, 1);
    for (int x = 0; x < m.w; x++) {
        double acc = 0.0;
        for (int y = 0; y < m.h; y++) acc += m.at(y, x);
        out.at(0, x) = static_cast<float>(acc);
    }
    return out;
}

Tensor gaussian_blur(const Tensor& img, float sigma) {
    if (sigma <= 0.0f) return img;
    int radius = 0;
    const std::vector<double> taps = gaussian_taps(sigma, &radius);

    Tensor tmp(img.h, img.w, img.c);
    for (int y = 0; y < img.h; y++) {
        for (int x = 0; x < img.w; x++) {
            for (int ch = 0; ch < img.c; ch++) {
                double acc = 0.0, wsum = 0.0;
                for (int k = -radius; k <= radius; k++) {
                    int xx = x + k;
                    if (xx < 0 || xx >= img.w) continue;
                    acc += taps[k + radius] * img.at(y, xx, ch);
                    wsum += taps[k + radius];
                }
                tmp.at(y, x, ch) = static_cast<float>(acc / wsum);
            }
        }
    }

    Tensor out(img.h, img.w, img.c);
    for (int y = 0; y < img.h; y++) {
        for (int x = 0; x < img.w; x++) {
            for (int ch = 0; ch < img.c; ch++) {
                double acc = 0.0, wsum = 0.0;
                for (int k = -radius; k <= radius; k++) {
                    int yy = y + k;
                    if (yy < 0 || yy >= img.h) continue;
                    acc += taps[k + radius] * tmp.at(yy, x, ch);
                    wsum += taps[k + radius];
                }
                out.at(y, x, ch) = static_cast<float>(acc / wsum);
            }
        }
    }
    return out;
}

Tensor bilinear_resize(const Tensor& img, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw InvalidInput("bilinear_resize: bad output size");
    if (out_h == img.h && out_w == img.w) return img;
    Tensor out(out_h, out_w, img.c);
    for (int y = 0; y < out_h; y++) {
        const LinearTap ty = bilinear_tap(y, out_h, img.h);
        for (int x = 0; x < out_w; x++) {
            const LinearTap tx = bilinear_tap(x, out_w, img.w);
            for (int ch = 0; ch < img.c; ch++) {
                double v = ty.w0 * (tx.w0 * img.at(ty.i0, tx.i0, ch) + tx.w1 * img.at(ty.i0, tx.i1, ch)) +
                           ty.w1 * (tx.w0 * img.at(ty.i1, tx.i0, ch) + tx.w1 * img.at(ty.i1, tx.i1, ch));
                out.at(y, x, ch) = static_cast<float>(v);
            }
        }
    }
    return out;
}

Tensor area_resample(const Tensor& img, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw InvalidInput("area_resample: bad output size");
    if (out_h == img.h && out_w == img.w) return img;
    const double sy = static_cast<double>(img.h) / out_h;
    const double sx = static_cast<double>(img.w) / out_w;
    Tensor out(out_h, out_w, img.c);
    for (int y = 0; y < out_h; y++) {
        const int y0 = static_cast<int>(std::floor(y * sy));
        const int y1 = std::min(img.h - 1, static_cast<int>(std::ceil((y + 1) * sy)) - 1);
        for (int x = 0; x < out_w; x++) {
            const int x0 = static_cast<int>(std::floor(x * sx));
            const int x1 = std::min(img.w - 1, static_cast<int>(std::ceil((x + 1) * sx)) - 1);
            for (int ch = 0; ch < img.c; ch++) {
                double acc = 0.0;
                for (int yy = y0; yy <= y1; yy++) {
                    const double wy = area_overlap(yy, y, sy);
                    for (int xx = x0; xx <= x1; xx++) {
                        acc += wy * area_overlap(xx, x, sx) * img.at(yy, xx, ch);
                    }
                }
                out.at(y, x, ch) = static_cast<float>(acc / (sy * sx));
            }
        }
    }
    return out;
}

Tensor minmax_normalize(const Tensor& img) {
    float mn = img.v[0], mx = img.v[0];
    for (float x : img.v) {
        mn = std::min(mn, x);
        mx = std::max(mx, x);
    }
    Tensor out(img.h, img.w, img.c);
    if (!(mx > mn)) return out;
    const float span = mx - mn;
    for (size_t i = 0; i < img.size(); i++) {
        out.v[i] = (img.v[i] - mn) / span;
    }
    return out;
}

Tensor pixelwise_max(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "pixelwise_max");
    Tensor out(a.h, a.w, a.c);
    for (size_t i = 0; i < out.size(); i++) {
        out.v[i] = std::max(a.v[i], b.v[i]);
    }
    return out;
}

Tensor clip01(const Tensor& t) {
    Tensor out(t.h, t.w, t.c);
    for (size_t i = 0; i < out.size(); i++) {
        out.v[i] = std::clamp(t.v[i], 0.0f, 1.0f);
    }
    return out;
}

Tensor binarize(const Tensor& t, float threshold) {
    Tensor out(t.h, t.w, t.c);
    for (size_t i = 0; i < out.size(); i++) {
        out.v[i] = t.v[i] >= threshold ? 1.0f : 0.0f;
    }
    return out;
}

}  // namespace glyphforge::kern::serial
