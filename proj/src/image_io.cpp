#include "ptyinr/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ptyinr {

namespace {

double unit_level(double v, double lo, double hi) {
    if (!(hi > lo)) return 0.0;
    const double t = (v - lo) / (hi - lo);
    return std::clamp(t, 0.0, 1.0);
}

void png_sink(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

std::vector<unsigned char> encode_png(const std::vector<unsigned char>& pixels, int rows,
                                      int cols, int channels) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png writer allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png writer allocation failed");
    }
    std::vector<unsigned char> out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png encoding failed");
    }
    png_set_write_fn(png, &out, png_sink, png_flush_noop);
    png_set_compression_level(png, 6);
    const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, static_cast<png_uint_32>(cols), static_cast<png_uint_32>(rows), 8,
                 color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < rows; ++r)
        png_write_row(png, const_cast<png_bytep>(&pixels[static_cast<size_t>(r) * cols *
                                                         channels]));
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
    return out;
}

void check_dims(std::span<const double> img, int rows, int cols) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("image dimensions must be positive");
    if (img.size() != static_cast<size_t>(rows) * cols)
        throw std::invalid_argument("shape mismatch in png encode");
}

}  // namespace

std::vector<unsigned char> encode_gray_png(std::span<const double> img, int rows, int cols,
                                           double lo, double hi) {
    check_dims(img, rows, cols);
    std::vector<unsigned char> pixels(img.size());
    for (size_t i = 0; i < img.size(); ++i)
        pixels[i] = static_cast<unsigned char>(std::lround(255.0 * unit_level(img[i], lo, hi)));
    return encode_png(pixels, rows, cols, 1);
}

std::vector<unsigned char> encode_warm_png(std::span<const double> img, int rows, int cols,
                                           double lo, double hi) {
    check_dims(img, rows, cols);
    std::vector<unsigned char> pixels(img.size() * 3);
    for (size_t i = 0; i < img.size(); ++i) {
        const double t = unit_level(img[i], lo, hi);
        const double r = std::clamp(3.0 * t, 0.0, 1.0);
        const double g = std::clamp(3.0 * t - 1.0, 0.0, 1.0);
        const double b = std::clamp(3.0 * t - 2.0, 0.0, 1.0);
        pixels[3 * i + 0] = static_cast<unsigned char>(std::lround(255.0 * r));
        pixels[3 * i + 1] = static_cast<unsigned char>(std::lround(255.0 * g));
        pixels[3 * i + 2] = static_cast<unsigned char>(std::lround(255.0 * b));
    }
    return encode_png(pixels, rows, cols, 3);
}

void write_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot create " + path.string());
    if (!bytes.empty())
        os.write(reinterpret_cast<const char*>(bytes.data()),
                 static_cast<std::streamsize>(bytes.size()));
    os.flush();
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace ptyinr
