#include "glyphforge/region.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>

#include <json.hpp>

#include "glyphforge/core/errors.hpp"

namespace glyphforge {

namespace {

void validate_box(const DetectionBox& b) {
    if (!(b.x0 < b.x1 && b.y0 < b.y1) || b.x0 < 0 || b.y0 < 0 || b.x1 > 1 || b.y1 > 1) {
        throw InvalidInput("detection box coordinates out of order or range");
    }
}

// Pixel rectangle of a normalized box on an H x W canvas, end-exclusive.
struct PixelRect {
    int x0, y0, x1, y1;
};

PixelRect to_pixels(const DetectionBox& b, int h, int w) {
    PixelRect r;
    r.x0 = std::clamp(static_cast<int>(std::lround(b.x0 * w)), 0, w);
    r.x1 = std::clamp(static_cast<int>(std::lround(b.x1 * w)), 0, w);
    r.y0 = std::clamp(static_cast<int>(std::lround(b.y0 * h)), 0, h);
    r.y1 = std::clamp(static_cast<int>(std::lround(b.y1 * h)), 0, h);
    return r;
}

bool rank_before(const DetectionBox& a, const DetectionBox& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.area() != b.area()) return a.area() > b.area();
    if (a.y0 != b.y0) return a.y0 < b.y0;
    return a.x0 < b.x0;
}

// Rescale about the center to the midpoint of the legal area range, then
// translate back inside the canvas.
DetectionBox clamp_area(const DetectionBox& b, float area_lo, float area_hi) {
    DetectionBox out = b;
    const float target = 0.5f * (area_lo + area_hi);
    const float area = b.area();
    if (area >= area_lo && area <= area_hi) return out;

    const float factor = std::sqrt(target / area);
    const float cx = 0.5f * (b.x0 + b.x1);
    const float cy = 0.5f * (b.y0 + b.y1);
    float hw = 0.5f * (b.x1 - b.x0) * factor;
    float hh = 0.5f * (b.y1 - b.y0) * factor;
    hw = std::min(hw, 0.5f);
    hh = std::min(hh, 0.5f);
    out.x0 = cx - hw;
    out.x1 = cx + hw;
    out.y0 = cy - hh;
    out.y1 = cy + hh;
    if (out.x0 < 0) {
        out.x1 -= out.x0;
        out.x0 = 0;
    }
    if (out.x1 > 1) {
        out.x0 -= out.x1 - 1;
        out.x1 = 1;
    }
    if (out.y0 < 0) {
        out.y1 -= out.y0;
        out.y0 = 0;
    }
    if (out.y1 > 1) {
        out.y0 -= out.y1 - 1;
        out.y1 = 1;
    }
    return out;
}

DetectionBox centered_box(float area) {
    const float half = 0.5f * std::sqrt(area);
    DetectionBox b;
    b.x0 = 0.5f - half;
    b.x1 = 0.5f + half;
    b.y0 = 0.5f - half;
    b.y1 = 0.5f + half;
    b.confidence = 0.0f;
    b.phrase = "fallback";
    return b;
}

Tensor rect_mask(const DetectionBox& b, int h, int w) {
    Tensor m(h, w, 1);
    PixelRect r = to_pixels(b, h, w);
    for (int y = r.y0; y < r.y1; y++) {
        for (int x = r.x0; x < r.x1; x++) m.at(y, x) = 1.0f;
    }
    return m;
}

RegionSplit split_with_mask(const GlyphImage& image, const DetectionBox& box, Tensor mask,
                            RegionOrigin origin) {
    RegionSplit s;
    s.box = box;
    s.origin = origin;
    s.mask = std::move(mask);
    const Tensor& px = image.pixels;
    s.subject_image = Tensor(px.h, px.w, 1);
    s.surrounding_image = Tensor(px.h, px.w, 1);
    for (size_t i = 0; i < px.size(); i++) {
        s.subject_image.v[i] = px.v[i] * s.mask.v[i];
        s.surrounding_image.v[i] = px.v[i] * (1.0f - s.mask.v[i]);
    }
    return s;
}

float overlap_fraction(const DetectionBox& b, const Tensor& claimed) {
    PixelRect r = to_pixels(b, claimed.h, claimed.w);
    const long box_px = static_cast<long>(r.x1 - r.x0) * (r.y1 - r.y0);
    if (box_px <= 0) return 1.0f;  // degenerate boxes are always rejected
    long hit = 0;
    for (int y = r.y0; y < r.y1; y++) {
        for (int x = r.x0; x < r.x1; x++) {
            if (claimed.at(y, x) != 0.0f) hit++;
        }
    }
    return static_cast<float>(hit) / static_cast<float>(box_px);
}

// Shared selection core: rank, fall back when filtering empties the set, and
// clip the mask against already-claimed pixels.
RegionSplit select_one(const GlyphImage& image, const std::vector<DetectionBox>& raw,
                       const FilterThresholds& th, const Tensor* claimed) {
    std::vector<DetectionBox> ranked =
        filter_and_rank(raw, th.area_lo, th.area_hi, th.conf_min);

    DetectionBox chosen;
    RegionOrigin origin;
    if (!ranked.empty()) {
        chosen = ranked.front();
        origin = RegionOrigin::ranked;
    } else if (!raw.empty()) {
        std::vector<DetectionBox> by_conf = raw;
        std::sort(by_conf.begin(), by_conf.end(), rank_before);
        chosen = clamp_area(by_conf.front(), th.area_lo, th.area_hi);
        origin = RegionOrigin::fallback_clamped;
    } else {
        chosen = centered_box(0.5f * (th.area_lo + th.area_hi));
        origin = RegionOrigin::fallback_centered;
    }

    Tensor mask = rect_mask(chosen, image.pixels.h, image.pixels.w);
    if (claimed != nullptr) {
        for (size_t i = 0; i < mask.size(); i++) {
            if (claimed->v[i] != 0.0f) mask.v[i] = 0.0f;  // earlier concepts own overlaps
        }
    }
    return split_with_mask(image, chosen, std::move(mask), origin);
}

}  // namespace

const char* region_origin_name(RegionOrigin o) {
    switch (o) {
        case RegionOrigin::ranked: return "ranked";
        case RegionOrigin::fallback_clamped: return "fallback-clamped";
        case RegionOrigin::fallback_centered: return "fallback-centered";
    }
    return "?";
}

std::vector<DetectionBox> connected_component_proposals(const Tensor& pixels,
                                                        const std::string& phrase) {
    const int h = pixels.h, w = pixels.w;
    std::vector<int> label(static_cast<size_t>(h) * w, -1);
    struct Comp {
        int min_x, min_y, max_x, max_y;
        long count;
    };
    std::vector<Comp> comps;

    std::deque<int> queue;
    for (int p0 = 0; p0 < h * w; p0++) {
        if (pixels.v[p0] == 0.0f || label[p0] >= 0) continue;
        const int id = static_cast<int>(comps.size());
        comps.push_back({w, h, -1, -1, 0});
        label[p0] = id;
        queue.push_back(p0);
        while (!queue.empty()) {
            int p = queue.front();
            queue.pop_front();
            int y = p / w, x = p % w;
            Comp& c = comps[id];
            c.min_x = std::min(c.min_x, x);
            c.max_x = std::max(c.max_x, x);
            c.min_y = std::min(c.min_y, y);
            c.max_y = std::max(c.max_y, y);
            c.count++;
            const int ny[4] = {y - 1, y + 1, y, y};
            const int nx[4] = {x, x, x - 1, x + 1};
            for (int k = 0; k < 4; k++) {
                if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) continue;
                int np = ny[k] * w + nx[k];
                if (pixels.v[np] != 0.0f && label[np] < 0) {
                    label[np] = id;
                    queue.push_back(np);
                }
            }
        }
    }

    std::vector<DetectionBox> boxes;
    for (const Comp& c : comps) {
        DetectionBox b;
        b.x0 = static_cast<float>(c.min_x) / w;
        b.x1 = static_cast<float>(c.max_x + 1) / w;
        b.y0 = static_cast<float>(c.min_y) / h;
        b.y1 = static_cast<float>(c.max_y + 1) / h;
        const long box_px = static_cast<long>(c.max_x - c.min_x + 1) * (c.max_y - c.min_y + 1);
        b.confidence = static_cast<float>(c.count) / static_cast<float>(box_px);  // ink density
        b.phrase = phrase;
        boxes.push_back(b);
    }
    std::sort(boxes.begin(), boxes.end(), rank_before);
    return boxes;
}

ToyDetectorBackend::ToyDetectorBackend(const std::string& fixture_file) {
    std::ifstream f(fixture_file);
    if (!f) throw BackendUnavailable("cannot open detector fixture file: " + fixture_file);
    nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw BackendUnavailable("detector fixture file is not a JSON object: " + fixture_file);
    }
    for (auto& [key, arr] : j.items()) {
        std::vector<DetectionBox> boxes;
        for (auto& e : arr) {
            DetectionBox b;
            b.x0 = e.at("box").at(0).get<float>();
            b.y0 = e.at("box").at(1).get<float>();
            b.x1 = e.at("box").at(2).get<float>();
            b.y1 = e.at("box").at(3).get<float>();
            b.confidence = e.at("score").get<float>();
            b.phrase = e.value("phrase", "");
            boxes.push_back(b);
        }
        table_[key] = std::move(boxes);
    }
}

void ToyDetectorBackend::add_fixture(const std::string& character, const std::string& prompt,
                                     std::vector<DetectionBox> boxes) {
    table_[character + "|" + prompt] = std::move(boxes);
}

std::vector<DetectionBox> ToyDetectorBackend::detect(const GlyphImage& image,
                                                     const std::string& prompt,
                                                     float /*box_threshold*/) {
    auto it = table_.find(image.text + "|" + prompt);
    if (it != table_.end()) return it->second;
    return connected_component_proposals(image.pixels, prompt);
}

std::vector<DetectionBox> detect(const GlyphImage& image, const std::string& prompt,
                                 DetectorBackend& backend) {
    std::vector<DetectionBox> boxes = backend.detect(image, prompt, 0.0f);
    for (const DetectionBox& b : boxes) validate_box(b);
    return boxes;
}

std::vector<DetectionBox> filter_and_rank(std::vector<DetectionBox> boxes, float area_lo,
                                          float area_hi, float conf_min) {
    if (!(area_lo >= 0.0f && area_lo < area_hi && area_hi <= 1.0f)) {
        throw InvalidInput("filter_and_rank: need 0 <= area_lo < area_hi <= 1");
    }
    std::vector<DetectionBox> keep;
    for (const DetectionBox& b : boxes) {
        const float a = b.area();
        if (a >= area_lo && a <= area_hi && b.confidence >= conf_min) keep.push_back(b);
    }
    std::sort(keep.begin(), keep.end(), rank_before);
    return keep;
}

RegionSplit split_regions(const GlyphImage& image, const DetectionBox& box) {
    validate_box(box);
    return split_with_mask(image, box, rect_mask(box, image.pixels.h, image.pixels.w),
                           RegionOrigin::ranked);
}

RegionSplit select_region(const GlyphImage& image, const std::string& prompt,
                          DetectorBackend& backend, const FilterThresholds& thresholds) {
    std::vector<DetectionBox> raw = detect(image, prompt, backend);
    return select_one(image, raw, thresholds, nullptr);
}

MultiRegionSplit select_regions_multi(const GlyphImage& image,
                                      std::span<const std::string> prompts,
                                      DetectorBackend& backend, const FilterThresholds& thresholds,
                                      std::span<const float> gammas) {
    if (prompts.empty()) throw InvalidInput("select_regions_multi: need at least one prompt");
    if (!gammas.empty() && gammas.size() != prompts.size()) {
        throw InvalidInput("select_regions_multi: gamma count does not match prompts");
    }

    MultiRegionSplit multi;
    Tensor claimed(image.pixels.h, image.pixels.w, 1);
    for (size_t i = 0; i < prompts.size(); i++) {
        // Detect on the glyph with already-claimed ink erased.
        GlyphImage erased = image;
        for (size_t p = 0; p < claimed.size(); p++) {
            if (claimed.v[p] != 0.0f) erased.pixels.v[p] = 0.0f;
        }
        std::vector<DetectionBox> raw = detect(erased, prompts[i], backend);

        // Candidates overlapping prior masks by > 10% of their own area drop
        // out before ranking.
        if (i > 0) {
            std::vector<DetectionBox> kept;
            for (const DetectionBox& b : raw) {
                if (overlap_fraction(b, claimed) <= 0.10f) kept.push_back(b);
            }
            raw = std::move(kept);
        }

        RegionSplit split = select_one(image, raw, thresholds, i > 0 ? &claimed : nullptr);
        for (size_t p = 0; p < claimed.size(); p++) {
            if (split.mask.v[p] != 0.0f) claimed.v[p] = 1.0f;
        }
        multi.splits.push_back(std::move(split));
        multi.gammas.push_back(gammas.empty() ? 0.8f : gammas[i]);
    }
    return multi;
}

Tensor combined_mask(const MultiRegionSplit& multi, int h, int w) {
    Tensor m(h, w, 1);
    for (const RegionSplit& s : multi.splits) {
        require_mask_for(s.mask, m, "combined_mask");
        for (size_t p = 0; p < m.size(); p++) {
            if (s.mask.v[p] != 0.0f) m.v[p] = 1.0f;
        }
    }
    return m;
}

}  // namespace glyphforge
