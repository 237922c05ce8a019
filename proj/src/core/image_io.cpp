#include "glyphforge/core/image_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include "glyphforge/core/errors.hpp"

namespace glyphforge {

namespace {

uint32_t crc32_table_entry(uint32_t n) {
    uint32_t c = n;
    for (int k = 0; k < 8; k++) {
        c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
    }
    return c;
}

const std::array<uint32_t, 256>& crc_table() {
    static const std::array<uint32_t, 256> table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t n = 0; n < 256; n++) t[n] = crc32_table_entry(n);
        return t;
    }();
    return table;
}

uint32_t crc32(const uint8_t* data, size_t n, uint32_t crc = 0xffffffffu) {
    const auto& t = crc_table();
    for (size_t i = 0; i < n; i++) crc = t[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return crc;
}

uint32_t adler32(const uint8_t* data, size_t n) {
    uint32_t a = 1, b = 0;
    for (size_t i = 0; i < n; i++) {
        a = (a + data[i]) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

void put_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& payload) {
    put_u32(out, static_cast<uint32_t>(payload.size()));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uint32_t crc = crc32(out.data() + start, out.size() - start) ^ 0xffffffffu;
    put_u32(out, crc);
}

// zlib stream with stored deflate blocks (max 65535 bytes each).
std::vector<uint8_t> zlib_store(const std::vector<uint8_t>& raw) {
    std::vector<uint8_t> z;
    z.push_back(0x78);
    z.push_back(0x01);
    size_t pos = 0;
    do {
        size_t len = std::min<size_t>(65535, raw.size() - pos);
        bool last = pos + len == raw.size();
        z.push_back(last ? 1 : 0);
        z.push_back(static_cast<uint8_t>(len & 0xff));
        z.push_back(static_cast<uint8_t>(len >> 8));
        z.push_back(static_cast<uint8_t>(~len & 0xff));
        z.push_back(static_cast<uint8_t>((~len >> 8) & 0xff));
        z.insert(z.end(), raw.begin() + pos, raw.begin() + pos + len);
        pos += len;
    } while (pos < raw.size());
    put_u32(z, adler32(raw.data(), raw.size()));
    return z;
}

std::vector<uint8_t> zlib_unstore(const uint8_t* p, size_t n) {
    if (n < 6) throw InvalidInput("png: truncated zlib stream");
    if ((p[0] & 0x0f) != 8) throw InvalidInput("png: unsupported zlib method");
    size_t pos = 2;
    std::vector<uint8_t> raw;
    for (;;) {
        if (pos >= n) throw InvalidInput("png: truncated deflate block");
        uint8_t hdr = p[pos++];
        if ((hdr & 0x06) != 0) {
            throw InvalidInput("png: compressed deflate blocks not supported by this reader");
        }
        if (pos + 4 > n) throw InvalidInput("png: truncated stored block");
        uint16_t len = static_cast<uint16_t>(p[pos] | (p[pos + 1] << 8));
        pos += 4;
        if (pos + len > n) throw InvalidInput("png: stored block overruns stream");
        raw.insert(raw.end(), p + pos, p + pos + len);
        pos += len;
        if (hdr & 1) break;
    }
    return raw;
}

uint32_t get_u32(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

const uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

}  // namespace

std::vector<uint8_t> encode_gray_png(const Tensor& img) {
    if (img.c != 1) throw InvalidInput("encode_gray_png: expected a single-channel image");
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(img.h) * (img.w + 1));
    for (int y = 0; y < img.h; y++) {
        raw.push_back(0);  // filter: none
        for (int x = 0; x < img.w; x++) {
            float v = std::clamp(img.at(y, x), 0.0f, 1.0f);
            raw.push_back(static_cast<uint8_t>(std::lround(v * 255.0f)));
        }
    }

    std::vector<uint8_t> out(kPngSig, kPngSig + 8);
    std::vector<uint8_t> ihdr;
    put_u32(ihdr, static_cast<uint32_t>(img.w));
    put_u32(ihdr, static_cast<uint32_t>(img.h));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", zlib_store(raw));
    put_chunk(out, "IEND", {});
    return out;
}

Tensor decode_gray_png(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSig, 8) != 0) {
        throw InvalidInput("png: bad signature");
    }
    size_t pos = 8;
    int w = 0, h = 0;
    std::vector<uint8_t> idat;
    while (pos + 12 <= bytes.size()) {
        uint32_t len = get_u32(&bytes[pos]);
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        const uint8_t* payload = &bytes[pos + 8];
        if (pos + 12 + len > bytes.size()) throw InvalidInput("png: truncated chunk");
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw InvalidInput("png: bad IHDR");
            w = static_cast<int>(get_u32(payload));
            h = static_cast<int>(get_u32(payload + 4));
            if (payload[8] != 8 || payload[9] != 0) {
                throw InvalidInput("png: reader supports 8-bit grayscale only");
            }
            if (payload[12] != 0) throw InvalidInput("png: interlacing not supported");
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (w <= 0 || h <= 0) throw InvalidInput("png: missing IHDR");
    std::vector<uint8_t> raw = zlib_unstore(idat.data(), idat.size());
    const size_t stride = static_cast<size_t>(w) + 1;
    if (raw.size() < stride * h) throw InvalidInput("png: scanline data too short");

    Tensor img(h, w, 1);
    std::vector<uint8_t> prev(w, 0), cur(w, 0);
    for (int y = 0; y < h; y++) {
        const uint8_t* line = &raw[y * stride];
        uint8_t filter = line[0];
        for (int x = 0; x < w; x++) {
            int rx = line[1 + x];
            int a = x > 0 ? cur[x - 1] : 0;
            int b = prev[x];
            int c = x > 0 ? prev[x - 1] : 0;
            int v;
            switch (filter) {
                case 0: v = rx; break;
                case 1: v = rx + a; break;
                case 2: v = rx + b; break;
                case 3: v = rx + (a + b) / 2; break;
                case 4: v = rx + paeth(a, b, c); break;
                default: throw InvalidInput("png: unknown scanline filter");
            }
            cur[x] = static_cast<uint8_t>(v & 0xff);
            img.at(y, x) = cur[x] / 255.0f;
        }
        std::swap(prev, cur);
    }
    return img;
}

void write_gray_png(const std::string& path, const Tensor& img) {
    write_file_bytes(path, encode_gray_png(img));
}

Tensor read_gray_png(const std::string& path) { return decode_gray_png(read_file_bytes(path)); }

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InvalidInput("cannot open file: " + path);
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw InvalidInput("cannot write file: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

namespace {
const char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(const uint8_t* data, size_t n) {
    std::string out;
    out.reserve((n + 2) / 3 * 4);
    for (size_t i = 0; i < n; i += 3) {
        uint32_t v = data[i] << 16;
        if (i + 1 < n) v |= data[i + 1] << 8;
        if (i + 2 < n) v |= data[i + 2];
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out.push_back(i + 1 < n ? kB64[(v >> 6) & 63] : '=');
        out.push_back(i + 2 < n ? kB64[v & 63] : '=');
    }
    return out;
}

std::string base64_encode(const std::vector<uint8_t>& b) { return base64_encode(b.data(), b.size()); }

std::vector<uint8_t> base64_decode(const std::string& s) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::vector<uint8_t> out;
    uint32_t buf = 0;
    int bits = 0;
    for (char c : s) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        int v = val(c);
        if (v < 0) throw InvalidInput("base64: invalid character");
        buf = (buf << 6) | static_cast<uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<uint8_t>((buf >> bits) & 0xff));
        }
    }
    return out;
}

}  // namespace glyphforge
