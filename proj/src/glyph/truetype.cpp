#include "glyphforge/truetype.hpp"

#include <cstring>

#include "glyphforge/core/errors.hpp"
#include "glyphforge/core/image_io.hpp"

namespace glyphforge {

namespace {

constexpr int kMaxCompositeDepth = 8;

// Component flags (glyf composite entries).
constexpr uint16_t ARG_1_AND_2_ARE_WORDS = 0x0001;
constexpr uint16_t ARGS_ARE_XY_VALUES = 0x0002;
constexpr uint16_t WE_HAVE_A_SCALE = 0x0008;
constexpr uint16_t MORE_COMPONENTS = 0x0020;
constexpr uint16_t WE_HAVE_AN_X_AND_Y_SCALE = 0x0040;
constexpr uint16_t WE_HAVE_A_TWO_BY_TWO = 0x0080;

// Simple-glyph point flags.
constexpr uint8_t ON_CURVE = 0x01;
constexpr uint8_t X_SHORT = 0x02;
constexpr uint8_t Y_SHORT = 0x04;
constexpr uint8_t REPEAT = 0x08;
constexpr uint8_t X_SAME_OR_POS = 0x10;
constexpr uint8_t Y_SAME_OR_POS = 0x20;

float f2dot14(int16_t v) { return static_cast<float>(v) / 16384.0f; }

TrueTypeFont::Pt apply(const std::array<float, 6>& m, float x, float y) {
    return {m[0] * x + m[2] * y + m[4], m[1] * x + m[3] * y + m[5]};
}

std::array<float, 6> compose(const std::array<float, 6>& a, const std::array<float, 6>& b) {
    // result = a applied after b
    return {a[0] * b[0] + a[2] * b[1],        a[1] * b[0] + a[3] * b[1],
            a[0] * b[2] + a[2] * b[3],        a[1] * b[2] + a[3] * b[3],
            a[0] * b[4] + a[2] * b[5] + a[4], a[1] * b[4] + a[3] * b[5] + a[5]};
}

}  // namespace

TrueTypeFont::TrueTypeFont(std::vector<uint8_t> bytes) : data_(std::move(bytes)) {
    if (data_.size() < 12) throw InvalidInput("font: file too small");
    uint32_t magic = u32(0);
    if (magic != 0x00010000 && magic != 0x74727565) {
        throw InvalidInput("font: not a TrueType font (CFF/OpenType outlines unsupported)");
    }
    uint16_t num_tables = u16(4);
    tables_.reserve(num_tables);
    for (uint16_t i = 0; i < num_tables; i++) {
        size_t rec = 12 + static_cast<size_t>(i) * 16;
        if (rec + 16 > data_.size()) throw InvalidInput("font: truncated table directory");
        std::string tag(reinterpret_cast<const char*>(&data_[rec]), 4);
        tables_.emplace_back(tag, Table{u32(rec + 8), u32(rec + 12)});
    }

    Table head = require_table("head");
    units_per_em_ = u16(head.offset + 18);
    loca_long_ = i16(head.offset + 50);
    Table maxp = require_table("maxp");
    glyph_count_ = u16(maxp.offset + 4);
    Table hhea = require_table("hhea");
    num_hmetrics_ = u16(hhea.offset + 34);
    require_table("loca");
    require_table("glyf");

    // cmap: prefer a Unicode subtable (3/10 full range, then 3/1 BMP, then 0/x).
    Table cmap = require_table("cmap");
    uint16_t n_sub = u16(cmap.offset + 2);
    int best_score = -1;
    for (uint16_t i = 0; i < n_sub; i++) {
        size_t rec = cmap.offset + 4 + static_cast<size_t>(i) * 8;
        uint16_t platform = u16(rec);
        uint16_t encoding = u16(rec + 2);
        uint32_t sub_off = u32(rec + 4);
        int score = -1;
        if (platform == 3 && encoding == 10) score = 3;
        else if (platform == 0) score = 2;
        else if (platform == 3 && encoding == 1) score = 1;
        if (score > best_score) {
            best_score = score;
            cmap_sub_ = cmap.offset + sub_off;
        }
    }
    if (best_score < 0) throw InvalidInput("font: no usable cmap subtable");
    cmap_format_ = u16(cmap_sub_);
    if (cmap_format_ != 0 && cmap_format_ != 4 && cmap_format_ != 6 && cmap_format_ != 12) {
        throw InvalidInput("font: unsupported cmap format " + std::to_string(cmap_format_));
    }
}

TrueTypeFont TrueTypeFont::load(const std::string& path) {
    return TrueTypeFont(read_file_bytes(path));
}

uint8_t TrueTypeFont::u8(size_t off) const {
    if (off >= data_.size()) throw InvalidInput("font: read past end");
    return data_[off];
}

uint16_t TrueTypeFont::u16(size_t off) const {
    if (off + 2 > data_.size()) throw InvalidInput("font: read past end");
    return static_cast<uint16_t>((data_[off] << 8) | data_[off + 1]);
}

int16_t TrueTypeFont::i16(size_t off) const { return static_cast<int16_t>(u16(off)); }

uint32_t TrueTypeFont::u32(size_t off) const {
    if (off + 4 > data_.size()) throw InvalidInput("font: read past end");
    return (static_cast<uint32_t>(data_[off]) << 24) | (static_cast<uint32_t>(data_[off + 1]) << 16) |
           (static_cast<uint32_t>(data_[off + 2]) << 8) | data_[off + 3];
}

TrueTypeFont::Table TrueTypeFont::require_table(const char* tag) const {
    for (const auto& [t, tab] : tables_) {
        if (t == tag) return tab;
    }
    throw InvalidInput(std::string("font: missing required table '") + tag + "'");
}

bool TrueTypeFont::has_table(const char* tag) const {
    for (const auto& [t, tab] : tables_) {
        if (t == tag) return true;
    }
    return false;
}

uint16_t TrueTypeFont::glyph_index(uint32_t cp) const {
    switch (cmap_format_) {
        case 0: {
            if (cp > 255) return 0;
            return u8(cmap_sub_ + 6 + cp);
        }
        case 4: {
            if (cp > 0xffff) return 0;
            uint16_t seg_x2 = u16(cmap_sub_ + 6);
            size_t ends = cmap_sub_ + 14;
            size_t starts = ends + seg_x2 + 2;
            size_t deltas = starts + seg_x2;
            size_t ranges = deltas + seg_x2;
            for (uint16_t s = 0; s < seg_x2; s += 2) {
                if (u16(ends + s) < cp) continue;
                uint16_t start = u16(starts + s);
                if (start > cp) return 0;
                uint16_t delta = u16(deltas + s);
                uint16_t range_off = u16(ranges + s);
                if (range_off == 0) return static_cast<uint16_t>((cp + delta) & 0xffff);
                size_t idx = ranges + s + range_off + 2 * (cp - start);
                uint16_t g = u16(idx);
                if (g == 0) return 0;
                return static_cast<uint16_t>((g + delta) & 0xffff);
            }
            return 0;
        }
        case 6: {
            uint16_t first = u16(cmap_sub_ + 6);
            uint16_t count = u16(cmap_sub_ + 8);
            if (cp < first || cp >= static_cast<uint32_t>(first) + count) return 0;
            return u16(cmap_sub_ + 10 + 2 * (cp - first));
        }
        case 12: {
            uint32_t n_groups = u32(cmap_sub_ + 12);
            size_t groups = cmap_sub_ + 16;
            uint32_t lo = 0, hi = n_groups;
            while (lo < hi) {
                uint32_t mid = (lo + hi) / 2;
                size_t g = groups + static_cast<size_t>(mid) * 12;
                uint32_t start = u32(g);
                uint32_t end = u32(g + 4);
                if (cp < start) {
                    hi = mid;
                } else if (cp > end) {
                    lo = mid + 1;
                } else {
                    return static_cast<uint16_t>(u32(g + 8) + (cp - start));
                }
            }
            return 0;
        }
        default:
            return 0;
    }
}

uint16_t TrueTypeFont::advance_width(uint16_t glyph) const {
    Table hmtx = require_table("hmtx");
    if (num_hmetrics_ == 0) return static_cast<uint16_t>(units_per_em_);
    if (glyph < num_hmetrics_) return u16(hmtx.offset + static_cast<size_t>(glyph) * 4);
    return u16(hmtx.offset + static_cast<size_t>(num_hmetrics_ - 1) * 4);
}

uint32_t TrueTypeFont::glyph_offset(uint16_t glyph, uint32_t* next) const {
    if (glyph >= glyph_count_) throw InvalidInput("font: glyph id out of range");
    Table loca = require_table("loca");
    Table glyf = require_table("glyf");
    uint32_t off, nxt;
    if (loca_long_) {
        off = u32(loca.offset + static_cast<size_t>(glyph) * 4);
        nxt = u32(loca.offset + static_cast<size_t>(glyph) * 4 + 4);
    } else {
        off = 2u * u16(loca.offset + static_cast<size_t>(glyph) * 2);
        nxt = 2u * u16(loca.offset + static_cast<size_t>(glyph) * 2 + 2);
    }
    *next = glyf.offset + nxt;
    return glyf.offset + off;
}

std::vector<TrueTypeFont::PathCmd> TrueTypeFont::outline(uint16_t glyph) const {
    std::vector<PathCmd> out;
    append_outline(glyph, {1, 0, 0, 1, 0, 0}, 0, out);
    return out;
}

void TrueTypeFont::append_outline(uint16_t glyph, const std::array<float, 6>& xf, int depth,
                                  std::vector<PathCmd>& out) const {
    if (depth > kMaxCompositeDepth) throw InvalidInput("font: composite glyph nesting too deep");
    uint32_t next = 0;
    uint32_t off = glyph_offset(glyph, &next);
    if (off >= next) return;  // empty glyph (e.g. space)

    int16_t n_contours = i16(off);
    if (n_contours >= 0) {
        // Simple glyph: end points, instructions, flag run, x deltas, y deltas.
        size_t p = off + 10;
        std::vector<uint16_t> ends(n_contours);
        for (int i = 0; i < n_contours; i++) {
            ends[i] = u16(p);
            p += 2;
        }
        if (n_contours == 0) return;
        uint16_t n_pts = static_cast<uint16_t>(ends.back() + 1);
        uint16_t instr = u16(p);
        p += 2 + instr;

        std::vector<uint8_t> flags(n_pts);
        for (uint16_t i = 0; i < n_pts;) {
            uint8_t f = u8(p++);
            flags[i++] = f;
            if (f & REPEAT) {
                uint8_t rep = u8(p++);
                while (rep-- && i < n_pts) flags[i++] = f;
            }
        }

        std::vector<float> xs(n_pts), ys(n_pts);
        int v = 0;
        for (uint16_t i = 0; i < n_pts; i++) {
            uint8_t f = flags[i];
            if (f & X_SHORT) {
                int d = u8(p++);
                v += (f & X_SAME_OR_POS) ? d : -d;
            } else if (!(f & X_SAME_OR_POS)) {
                v += i16(p);
                p += 2;
            }
            xs[i] = static_cast<float>(v);
        }
        v = 0;
        for (uint16_t i = 0; i < n_pts; i++) {
            uint8_t f = flags[i];
            if (f & Y_SHORT) {
                int d = u8(p++);
                v += (f & Y_SAME_OR_POS) ? d : -d;
            } else if (!(f & Y_SAME_OR_POS)) {
                v += i16(p);
                p += 2;
            }
            ys[i] = static_cast<float>(v);
        }

        uint16_t start = 0;
        for (int ci = 0; ci < n_contours; ci++) {
            uint16_t end = ends[ci];
            uint16_t n = static_cast<uint16_t>(end - start + 1);
            if (n < 2) {
                start = static_cast<uint16_t>(end + 1);
                continue;
            }
            auto pt = [&](uint16_t i) { return apply(xf, xs[start + i % n], ys[start + i % n]); };
            auto on = [&](uint16_t i) { return (flags[start + i % n] & ON_CURVE) != 0; };

            // Pick an on-curve start; a fully off-curve contour starts at an
            // implied midpoint.
            uint16_t first = 0;
            bool found = false;
            for (uint16_t i = 0; i < n; i++) {
                if (on(i)) {
                    first = i;
                    found = true;
                    break;
                }
            }
            Pt start_pt;
            if (found) {
                start_pt = pt(first);
            } else {
                Pt a = pt(0), b = pt(1);
                start_pt = {(a.x + b.x) / 2, (a.y + b.y) / 2};
            }
            out.push_back({PathCmd::Move, start_pt, {}});

            Pt anchor = start_pt;
            uint16_t i = found ? static_cast<uint16_t>(first + 1) : 0;
            uint16_t steps = n;
            Pt pending_ctrl{};
            bool have_ctrl = false;
            for (uint16_t k = 0; k < steps; k++, i++) {
                Pt cur = pt(i);
                if (on(i)) {
                    if (have_ctrl) {
                        out.push_back({PathCmd::Quad, cur, pending_ctrl});
                        have_ctrl = false;
                    } else {
                        out.push_back({PathCmd::Line, cur, {}});
                    }
                    anchor = cur;
                } else {
                    if (have_ctrl) {
                        Pt mid{(pending_ctrl.x + cur.x) / 2, (pending_ctrl.y + cur.y) / 2};
                        out.push_back({PathCmd::Quad, mid, pending_ctrl});
                        anchor = mid;
                    }
                    pending_ctrl = cur;
                    have_ctrl = true;
                }
            }
            if (have_ctrl) {
                out.push_back({PathCmd::Quad, start_pt, pending_ctrl});
            } else if (anchor.x != start_pt.x || anchor.y != start_pt.y) {
                out.push_back({PathCmd::Line, start_pt, {}});
            }
            start = static_cast<uint16_t>(end + 1);
        }
    } else {
        // Composite glyph.
        size_t p = off + 10;
        uint16_t flags_c;
        do {
            flags_c = u16(p);
            uint16_t comp = u16(p + 2);
            p += 4;
            float dx = 0, dy = 0;
            if (flags_c & ARG_1_AND_2_ARE_WORDS) {
                if (flags_c & ARGS_ARE_XY_VALUES) {
                    dx = i16(p);
                    dy = i16(p + 2);
                }
                p += 4;
            } else {
                if (flags_c & ARGS_ARE_XY_VALUES) {
                    dx = static_cast<int8_t>(u8(p));
                    dy = static_cast<int8_t>(u8(p + 1));
                }
                p += 2;
            }
            std::array<float, 6> m = {1, 0, 0, 1, dx, dy};
            if (flags_c & WE_HAVE_A_SCALE) {
                m[0] = m[3] = f2dot14(i16(p));
                p += 2;
            } else if (flags_c & WE_HAVE_AN_X_AND_Y_SCALE) {
                m[0] = f2dot14(i16(p));
                m[3] = f2dot14(i16(p + 2));
                p += 4;
            } else if (flags_c & WE_HAVE_A_TWO_BY_TWO) {
                m[0] = f2dot14(i16(p));
                m[1] = f2dot14(i16(p + 2));
                m[2] = f2dot14(i16(p + 4));
                m[3] = f2dot14(i16(p + 6));
                p += 8;
            }
            append_outline(comp, compose(xf, m), depth + 1, out);
        } while (flags_c & MORE_COMPONENTS);
    }
}

std::vector<uint32_t> decode_utf8(const std::string& s) {
    std::vector<uint32_t> cps;
    size_t i = 0;
    while (i < s.size()) {
        uint8_t b = static_cast<uint8_t>(s[i]);
        uint32_t cp = 0;
        int extra = 0;
        if (b < 0x80) {
            cp = b;
        } else if ((b & 0xe0) == 0xc0) {
            cp = b & 0x1f;
            extra = 1;
        } else if ((b & 0xf0) == 0xe0) {
            cp = b & 0x0f;
            extra = 2;
        } else if ((b & 0xf8) == 0xf0) {
            cp = b & 0x07;
            extra = 3;
        } else {
            throw InvalidInput("invalid UTF-8 byte sequence");
        }
        if (i + extra >= s.size()) throw InvalidInput("truncated UTF-8 sequence");
        for (int k = 1; k <= extra; k++) {
            uint8_t cont = static_cast<uint8_t>(s[i + k]);
            if ((cont & 0xc0) != 0x80) throw InvalidInput("invalid UTF-8 continuation byte");
            cp = (cp << 6) | (cont & 0x3f);
        }
        cps.push_back(cp);
        i += 1 + extra;
    }
    return cps;
}

}  // namespace glyphforge
