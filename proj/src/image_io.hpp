#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "types.hpp"

namespace fsel {

// Decodes an 8-bit PNG to a [0,1] tensor. Grayscale (with or without alpha)
// becomes C=1, everything else C=3; alpha is dropped.
ImageTensor decode_png(std::span<const std::uint8_t> bytes);
ImageTensor read_png(const std::filesystem::path& path);

// Quantizes to 8 bits (round to nearest).
std::vector<std::uint8_t> encode_png(const ImageTensor& image);
void write_png(const std::filesystem::path& path, const ImageTensor& image);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace fsel
