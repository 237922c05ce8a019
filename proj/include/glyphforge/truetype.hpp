#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace glyphforge {

// Compact TrueType loader: cmap (formats 0/4/6/12), loca, glyf with simple and
// composite outlines, hmtx advances. Quadratic-only (no CFF), no hinting, no
// kerning -- just enough to turn a codepoint sequence into outlines.
class TrueTypeFont {
public:
    struct Pt {
        float x = 0, y = 0;
    };

    // moveto starts a contour (implicitly closed at the next moveto / end).
    struct PathCmd {
        enum Kind { Move, Line, Quad } kind = Move;
        Pt p;  // end point
        Pt c;  // control point (Quad only)
    };

    explicit TrueTypeFont(std::vector<uint8_t> bytes);
    static TrueTypeFont load(const std::string& path);

    int units_per_em() const { return units_per_em_; }
    int glyph_count() const { return glyph_count_; }

    // 0 means the font has no mapping for this codepoint (.notdef).
    uint16_t glyph_index(uint32_t codepoint) const;

    uint16_t advance_width(uint16_t glyph) const;

    // Outline in font units (y up). Composite glyphs are resolved recursively.
    std::vector<PathCmd> outline(uint16_t glyph) const;

private:
    struct Table {
        uint32_t offset = 0;
        uint32_t length = 0;
    };

    uint8_t u8(size_t off) const;
    uint16_t u16(size_t off) const;
    int16_t i16(size_t off) const;
    uint32_t u32(size_t off) const;
    Table require_table(const char* tag) const;
    bool has_table(const char* tag) const;
    uint32_t glyph_offset(uint16_t glyph, uint32_t* next) const;
    void append_outline(uint16_t glyph, const std::array<float, 6>& xf, int depth,
                        std::vector<PathCmd>& out) const;

    std::vector<uint8_t> data_;
    std::vector<std::pair<std::string, Table>> tables_;
    int units_per_em_ = 1000;
    int glyph_count_ = 0;
    int loca_long_ = 0;
    int num_hmetrics_ = 0;
    size_t cmap_sub_ = 0;  // absolute offset of the selected cmap subtable
    uint16_t cmap_format_ = 0;
};

std::vector<uint32_t> decode_utf8(const std::string& s);

}  // namespace glyphforge
