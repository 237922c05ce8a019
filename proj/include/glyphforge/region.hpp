#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "glyphforge/core/tensor.hpp"
#include "glyphforge/glyph.hpp"

namespace glyphforge {

// Normalized detection box with confidence, as returned by an open-vocabulary
// detector.
struct DetectionBox {
    float x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // normalized, x0<x1, y0<y1
    float confidence = 0;
    std::string phrase;

    float area() const { return (x1 - x0) * (y1 - y0); }
};

enum class RegionOrigin { ranked, fallback_clamped, fallback_centered };

const char* region_origin_name(RegionOrigin o);

// Subject/surrounding partition of a glyph: mask is the box rectangle (minus
// previously claimed pixels in multi-concept runs), subject = image*mask,
// surrounding = image*(1-mask).
struct RegionSplit {
    Tensor subject_image;
    Tensor surrounding_image;
    Tensor mask;
    DetectionBox box;
    RegionOrigin origin = RegionOrigin::ranked;
};

struct MultiRegionSplit {
    std::vector<RegionSplit> splits;
    std::vector<float> gammas;
};

struct FilterThresholds {
    float conf_min = 0.5f;
    float area_lo = 0.4f;
    float area_hi = 0.6f;
};

class DetectorBackend {
public:
    virtual ~DetectorBackend() = default;
    virtual std::string name() const = 0;
    // box_threshold is forwarded to backends that support it; the toy backend
    // returns its raw proposals and leaves all filtering to filter_and_rank.
    virtual std::vector<DetectionBox> detect(const GlyphImage& image, const std::string& prompt,
                                             float box_threshold) = 0;
};

// Fixture table keyed by "char|prompt" with a connected-component proposal
// generator as fallback, so region selection runs fully offline.
class ToyDetectorBackend : public DetectorBackend {
public:
    ToyDetectorBackend() = default;
    explicit ToyDetectorBackend(const std::string& fixture_file);

    void add_fixture(const std::string& character, const std::string& prompt,
                     std::vector<DetectionBox> boxes);

    std::string name() const override { return "toy-detector"; }
    std::vector<DetectionBox> detect(const GlyphImage& image, const std::string& prompt,
                                     float box_threshold) override;

private:
    std::map<std::string, std::vector<DetectionBox>> table_;
};

// HTTP adapter (GLYPHFORGE_DETECTOR_URL); request carries the glyph as PNG.
class HttpDetectorBackend : public DetectorBackend {
public:
    HttpDetectorBackend(std::string url, int timeout_ms = 30000);

    std::string name() const override { return "detector-http"; }
    std::vector<DetectionBox> detect(const GlyphImage& image, const std::string& prompt,
                                     float box_threshold) override;

private:
    std::string url_;
    int timeout_ms_;
};

// Connected components of the ink (4-connectivity): bbox plus ink density as
// confidence. Exposed for tests and the toy backend.
std::vector<DetectionBox> connected_component_proposals(const Tensor& pixels,
                                                        const std::string& phrase);

std::vector<DetectionBox> detect(const GlyphImage& image, const std::string& prompt,
                                 DetectorBackend& backend);

// Survivors satisfy area in [area_lo, area_hi] and confidence >= conf_min,
// sorted by confidence desc, ties by larger area, then reading order.
std::vector<DetectionBox> filter_and_rank(std::vector<DetectionBox> boxes, float area_lo = 0.4f,
                                          float area_hi = 0.6f, float conf_min = 0.5f);

RegionSplit split_regions(const GlyphImage& image, const DetectionBox& box);

RegionSplit select_region(const GlyphImage& image, const std::string& prompt,
                          DetectorBackend& backend, const FilterThresholds& thresholds = {});

MultiRegionSplit select_regions_multi(const GlyphImage& image,
                                      std::span<const std::string> prompts,
                                      DetectorBackend& backend,
                                      const FilterThresholds& thresholds = {},
                                      std::span<const float> gammas = {});

Tensor combined_mask(const MultiRegionSplit& multi, int h, int w);

}  // namespace glyphforge
