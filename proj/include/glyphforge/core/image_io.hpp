#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glyphforge/core/tensor.hpp"

namespace glyphforge {

// 8-bit grayscale PNG. The encoder emits stored (uncompressed) deflate
// blocks, which keeps the output a valid PNG for any viewer while staying
// byte-deterministic; the decoder handles exactly that subset plus scanline
// filters 0-4, enough to read back anything this pipeline writes.
std::vector<uint8_t> encode_gray_png(const Tensor& img);
Tensor decode_gray_png(const std::vector<uint8_t>& bytes);

void write_gray_png(const std::string& path, const Tensor& img);
Tensor read_gray_png(const std::string& path);

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);

std::string base64_encode(const uint8_t* data, size_t n);
std::string base64_encode(const std::vector<uint8_t>& b);
std::vector<uint8_t> base64_decode(const std::string& s);

}  // namespace glyphforge
