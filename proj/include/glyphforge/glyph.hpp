#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "glyphforge/core/tensor.hpp"
#include "glyphforge/truetype.hpp"

namespace glyphforge {

// Rasterized character: ink = 1 on background = 0, binarized, square canvas.
struct GlyphImage {
    Tensor pixels;
    std::string text;
    std::string font_id;
    int size_px = 512;

    float ink_fraction() const;
};

enum class ControlKind { depth, scribble, segmentation };

const char* control_kind_name(ControlKind k);
ControlKind control_kind_from_name(const std::string& s);

// Conditioning image fed to a control-conditioned denoiser. kind routes it:
// segmentation -> subject branch, scribble -> surrounding branch, depth ->
// the geometry-deformation stage.
struct ControlSignal {
    ControlKind kind = ControlKind::scribble;
    Tensor image;
    float conditioning_scale = 1.0f;
};

// Resolves font ids against a list of directories (GLYPHFORGE_FONT_DIR plus
// the usual system locations) and caches parsed fonts.
class FontLibrary {
public:
    FontLibrary();
    explicit FontLibrary(std::vector<std::string> search_dirs);

    std::string resolve(const std::string& font_id) const;
    const TrueTypeFont& get(const std::string& font_id);

    static const char* default_font_id() { return "DejaVuSans.ttf"; }

private:
    std::vector<std::string> dirs_;
    std::mutex mu_;
    std::map<std::string, std::unique_ptr<TrueTypeFont>> cache_;
};

// Centered rasterization with an 8% margin on each side, anti-aliased then
// binarized at 0.5. Blank results (e.g. all-whitespace input) are rejected.
GlyphImage rasterize(const std::string& text, FontLibrary& fonts, const std::string& font_id,
                     int size_px = 512);
GlyphImage rasterize(const std::string& text, const TrueTypeFont& font, const std::string& font_id,
                     int size_px = 512);

ControlSignal to_depth(const GlyphImage& g);
ControlSignal to_scribble(const GlyphImage& g);
ControlSignal to_segmentation(const Tensor& img);

}  // namespace glyphforge
