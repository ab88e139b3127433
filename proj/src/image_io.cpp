#include "image_io.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include <openssl/evp.h>
#include <png.h>

#include "error.hpp"

namespace fsel {

namespace {

struct PngImage {
    png_image image{};
    PngImage() {
        image.version = PNG_IMAGE_VERSION;
    }
    ~PngImage() { png_image_free(&image); }
    PngImage(const PngImage&) = delete;
    PngImage& operator=(const PngImage&) = delete;
};

}  // namespace

ImageTensor decode_png(std::span<const std::uint8_t> bytes) {
    PngImage png;
    if (!png_image_begin_read_from_memory(&png.image, bytes.data(), bytes.size())) {
        throw Error(ErrorCode::Io, std::string("PNG decode failed: ") + png.image.message);
    }
    const bool gray = (png.image.format & PNG_FORMAT_FLAG_COLOR) == 0;
    png.image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png.image));
    if (!png_image_finish_read(&png.image, nullptr, buffer.data(), 0, nullptr)) {
        throw Error(ErrorCode::Io, std::string("PNG decode failed: ") + png.image.message);
    }
    std::vector<double> pixels(buffer.size());
    for (std::size_t i = 0; i < buffer.size(); ++i) pixels[i] = buffer[i] / 255.0;
    return ImageTensor(png.image.height, png.image.width, gray ? 1 : 3, std::move(pixels));
}

ImageTensor read_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open image '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_png(bytes);
    } catch (const Error& e) {
        throw Error(ErrorCode::Io, "'" + path.string() + "': " + e.what());
    }
}

std::vector<std::uint8_t> encode_png(const ImageTensor& image) {
    std::vector<std::uint8_t> raw(image.pixels().size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        raw[i] = static_cast<std::uint8_t>(std::lround(image.pixels()[i] * 255.0));
    }
    PngImage png;
    png.image.width = static_cast<png_uint_32>(image.width());
    png.image.height = static_cast<png_uint_32>(image.height());
    png.image.format = image.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png.image, nullptr, &size, 0, raw.data(), 0, nullptr)) {
        throw Error(ErrorCode::Io, std::string("PNG encode failed: ") + png.image.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&png.image, out.data(), &size, 0, raw.data(), 0, nullptr)) {
        throw Error(ErrorCode::Io, std::string("PNG encode failed: ") + png.image.message);
    }
    out.resize(size);
    return out;
}

void write_png(const std::filesystem::path& path, const ImageTensor& image) {
    const auto bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write image '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw Error(ErrorCode::Validation, "base64 length is not a multiple of 4");
    std::vector<std::uint8_t> out(3 * text.size() / 4);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) throw Error(ErrorCode::Validation, "invalid base64 payload");
    // EVP_DecodeBlock keeps the zero bytes that padding stands for.
    std::size_t len = static_cast<std::size_t>(n);
    if (!text.empty() && text.back() == '=') --len;
    if (text.size() > 1 && text[text.size() - 2] == '=') --len;
    out.resize(len);
    return out;
}

}  // namespace fsel
