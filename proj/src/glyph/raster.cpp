#include "glyphforge/glyph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>

#include "glyphforge/core/errors.hpp"
#include "glyphforge/core/kernels.hpp"

namespace glyphforge {

namespace {

constexpr float kMarginFrac = 0.08f;
constexpr float kBinarizeThreshold = 0.5f;
constexpr int kSubsamplesY = 4;

struct Edge {
    float x0, y0, x1, y1;  // y0 < y1 after normalization
    int winding;           // +1 if original direction was downward
};

void add_edge(std::vector<Edge>& edges, float x0, float y0, float x1, float y1) {
    if (y0 == y1) return;  // horizontal edges never cross a scanline
    if (y0 < y1) {
        edges.push_back({x0, y0, x1, y1, +1});
    } else {
        edges.push_back({x1, y1, x0, y0, -1});
    }
}

void flatten_quad(std::vector<Edge>& edges, float x0, float y0, float cx, float cy, float x1,
                  float y1) {
    // Max deviation of a quadratic from its chord is |p0 - 2c + p1| / 4.
    float dx = x0 - 2 * cx + x1;
    float dy = y0 - 2 * cy + y1;
    float dev = 0.25f * std::max(std::fabs(dx), std::fabs(dy));
    int n = std::clamp(static_cast<int>(std::ceil(std::sqrt(dev / 0.1f))), 1, 64);
    float px = x0, py = y0;
    for (int i = 1; i <= n; i++) {
        float t = static_cast<float>(i) / n;
        float mt = 1.0f - t;
        float qx = mt * mt * x0 + 2 * mt * t * cx + t * t * x1;
        float qy = mt * mt * y0 + 2 * mt * t * cy + t * t * y1;
        add_edge(edges, px, py, qx, qy);
        px = qx;
        py = qy;
    }
}

// Non-zero-winding coverage rasterizer: 4 sub-scanlines per row, exact span
// overlap in x.
Tensor rasterize_edges(const std::vector<Edge>& edges, int size_px) {
    Tensor cov(size_px, size_px, 1);
    struct Crossing {
        float x;
        int w;
    };
#pragma omp parallel for schedule(static)
    for (int row = 0; row < size_px; row++) {
        std::vector<Crossing> xs;
        for (int s = 0; s < kSubsamplesY; s++) {
            float y = row + (s + 0.5f) / kSubsamplesY;
            xs.clear();
            for (const Edge& e : edges) {
                if (y < e.y0 || y >= e.y1) continue;
                float t = (y - e.y0) / (e.y1 - e.y0);
                xs.push_back({e.x0 + t * (e.x1 - e.x0), e.winding});
            }
            if (xs.empty()) continue;
            std::sort(xs.begin(), xs.end(), [](const Crossing& a, const Crossing& b) { return a.x < b.x; });
            int winding = 0;
            float span_start = 0;
            for (size_t i = 0; i < xs.size(); i++) {
                int prev = winding;
                winding += xs[i].w;
                if (prev == 0 && winding != 0) {
                    span_start = xs[i].x;
                } else if (prev != 0 && winding == 0) {
                    float a = std::clamp(span_start, 0.0f, static_cast<float>(size_px));
                    float b = std::clamp(xs[i].x, 0.0f, static_cast<float>(size_px));
                    int pa = static_cast<int>(a);
                    int pb = std::min(size_px - 1, static_cast<int>(b));
                    for (int px = pa; px <= pb && px < size_px; px++) {
                        float lo = std::max(a, static_cast<float>(px));
                        float hi = std::min(b, static_cast<float>(px + 1));
                        if (hi > lo) cov.at(row, px) += (hi - lo) / kSubsamplesY;
                    }
                }
            }
        }
    }
    return cov;
}

std::vector<std::string> default_font_dirs() {
    std::vector<std::string> dirs;
    if (const char* env = std::getenv("GLYPHFORGE_FONT_DIR")) {
        dirs.push_back(env);
    }
    dirs.push_back(".");
    dirs.push_back("/usr/share/fonts/truetype/dejavu");
    dirs.push_back("/usr/share/fonts/truetype");
    dirs.push_back("/usr/share/fonts");
    return dirs;
}

}  // namespace

float GlyphImage::ink_fraction() const {
    double s = 0.0;
    for (float v : pixels.v) s += v;
    return static_cast<float>(s / pixels.size());
}

const char* control_kind_name(ControlKind k) {
    switch (k) {
        case ControlKind::depth: return "depth";
        case ControlKind::scribble: return "scribble";
        case ControlKind::segmentation: return "segmentation";
    }
    return "?";
}

ControlKind control_kind_from_name(const std::string& s) {
    if (s == "depth") return ControlKind::depth;
    if (s == "scribble") return ControlKind::scribble;
    if (s == "segmentation") return ControlKind::segmentation;
    throw InvalidInput("unknown control kind: " + s);
}

FontLibrary::FontLibrary() : dirs_(default_font_dirs()) {}

FontLibrary::FontLibrary(std::vector<std::string> search_dirs) : dirs_(std::move(search_dirs)) {}

std::string FontLibrary::resolve(const std::string& font_id) const {
    namespace fs = std::filesystem;
    if (font_id.empty()) throw FontNotFound("empty font id");
    if (fs::exists(font_id)) return font_id;
    for (const std::string& dir : dirs_) {
        for (const std::string& name : {font_id, font_id + ".ttf", font_id + ".otf"}) {
            fs::path p = fs::path(dir) / name;
            std::error_code ec;
            if (fs::exists(p, ec)) return p.string();
        }
    }
    throw FontNotFound("cannot resolve font '" + font_id + "'");
}

const TrueTypeFont& FontLibrary::get(const std::string& font_id) {
    std::string path = resolve(font_id);
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(path);
    if (it == cache_.end()) {
        it = cache_.emplace(path, std::make_unique<TrueTypeFont>(TrueTypeFont::load(path))).first;
    }
    return *it->second;
}

GlyphImage rasterize(const std::string& text, FontLibrary& fonts, const std::string& font_id,
                     int size_px) {
    return rasterize(text, fonts.get(font_id), font_id, size_px);
}

GlyphImage rasterize(const std::string& text, const TrueTypeFont& font, const std::string& font_id,
                     int size_px) {
    if (text.empty()) throw InvalidInput("rasterize: empty input string");
    if (size_px < 64) throw InvalidInput("rasterize: size_px must be >= 64");

    std::vector<uint32_t> cps = decode_utf8(text);

    // Horizontal layout in font units.
    struct Placed {
        uint16_t glyph;
        float x_off;
    };
    std::vector<Placed> placed;
    float pen = 0.0f;
    for (uint32_t cp : cps) {
        uint16_t gid = font.glyph_index(cp);
        if (gid == 0) {
            throw MissingGlyph("font '" + font_id + "' has no glyph for U+" +
                               [](uint32_t v) {
                                   char buf[9];
                                   std::snprintf(buf, sizeof(buf), "%04X", v);
                                   return std::string(buf);
                               }(cp));
        }
        placed.push_back({gid, pen});
        pen += font.advance_width(gid);
    }

    // Gather outlines, track the union bounding box.
    std::vector<TrueTypeFont::PathCmd> cmds;
    float xmin = std::numeric_limits<float>::max(), xmax = -xmin;
    float ymin = xmin, ymax = -xmin;
    for (const Placed& pl : placed) {
        for (TrueTypeFont::PathCmd c : font.outline(pl.glyph)) {
            c.p.x += pl.x_off;
            c.c.x += pl.x_off;
            xmin = std::min(xmin, c.p.x);
            xmax = std::max(xmax, c.p.x);
            ymin = std::min(ymin, c.p.y);
            ymax = std::max(ymax, c.p.y);
            if (c.kind == TrueTypeFont::PathCmd::Quad) {
                xmin = std::min(xmin, c.c.x);
                xmax = std::max(xmax, c.c.x);
                ymin = std::min(ymin, c.c.y);
                ymax = std::max(ymax, c.c.y);
            }
            cmds.push_back(c);
        }
    }
    if (cmds.empty() || xmax <= xmin || ymax <= ymin) {
        throw InvalidInput("rasterize: '" + text + "' renders blank in font '" + font_id + "'");
    }

    // Fit into the canvas minus the fixed margin, centered, aspect preserved.
    const float margin = kMarginFrac * size_px;
    const float avail = size_px - 2.0f * margin;
    const float scale = std::min(avail / (xmax - xmin), avail / (ymax - ymin));
    const float ox = margin + (avail - (xmax - xmin) * scale) / 2.0f - xmin * scale;
    const float oy = margin + (avail - (ymax - ymin) * scale) / 2.0f + ymax * scale;  // y flips

    std::vector<Edge> edges;
    float cx = 0, cy = 0;
    auto tx = [&](TrueTypeFont::Pt p) { return std::pair<float, float>{ox + p.x * scale, oy - p.y * scale}; };
    for (const TrueTypeFont::PathCmd& c : cmds) {
        auto [px, py] = tx(c.p);
        switch (c.kind) {
            case TrueTypeFont::PathCmd::Move:
                cx = px;
                cy = py;
                break;
            case TrueTypeFont::PathCmd::Line:
                add_edge(edges, cx, cy, px, py);
                cx = px;
                cy = py;
                break;
            case TrueTypeFont::PathCmd::Quad: {
                auto [qx, qy] = tx(c.c);
                flatten_quad(edges, cx, cy, qx, qy, px, py);
                cx = px;
                cy = py;
                break;
            }
        }
    }

    GlyphImage g;
    g.pixels = kern::binarize(rasterize_edges(edges, size_px), kBinarizeThreshold);
    g.text = text;
    g.font_id = font_id;
    g.size_px = size_px;
    if (g.ink_fraction() == 0.0f) {
        throw InvalidInput("rasterize: '" + text + "' produced no ink at size " +
                           std::to_string(size_px));
    }
    return g;
}

ControlSignal to_depth(const GlyphImage& g) {
    // Ink is near (1.0), background far (0.0); grayscale passes through.
    ControlSignal c;
    c.kind = ControlKind::depth;
    c.image = g.pixels;
    return c;
}

ControlSignal to_scribble(const GlyphImage& g) {
    ControlSignal c;
    c.kind = ControlKind::scribble;
    c.image = g.pixels;  // strokes already white-on-black
    return c;
}

ControlSignal to_segmentation(const Tensor& img) {
    for (float v : img.v) {
        if (v < 0.0f || v > 1.0f) throw InvalidInput("to_segmentation: input outside [0,1]");
    }
    ControlSignal c;
    c.kind = ControlKind::segmentation;
    c.image = kern::binarize(img, kBinarizeThreshold);
    return c;
}

}  // namespace glyphforge
