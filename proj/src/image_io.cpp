#include "jgs/image_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

#ifdef JGS_HAS_PNG
#include <png.h>
#endif

namespace jgs {

double linear_to_encoded(double v) {
    v = std::min(1.0, std::max(0.0, v));
    return std::pow(v, 1.0 / 2.2);
}

double encoded_to_linear(double v) { return std::pow(v, 2.2); }

namespace {

std::vector<uint8_t> encode_bytes(const ImageBuffer& img) {
    std::vector<uint8_t> bytes(img.rgb.size());
    for (std::size_t i = 0; i < img.rgb.size(); ++i)
        bytes[i] = static_cast<uint8_t>(std::lround(255.0 * linear_to_encoded(img.rgb[i])));
    return bytes;
}

ImageBuffer decode_bytes(const std::vector<uint8_t>& bytes, int w, int h) {
    ImageBuffer img;
    img.resize(w, h);
    for (std::size_t i = 0; i < img.rgb.size(); ++i)
        img.rgb[i] = encoded_to_linear(bytes[i] / 255.0);
    std::fill(img.alpha.begin(), img.alpha.end(), 1.0);
    return img;
}

bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void atomic_replace(const std::string& tmp, const std::string& path) {
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw std::runtime_error("write_image: cannot move temporary file onto " + path);
    }
}

void write_ppm(const ImageBuffer& img, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("write_image: cannot open " + tmp);
        f << "P6\n" << img.width << " " << img.height << "\n255\n";
        const auto bytes = encode_bytes(img);
        f.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
        if (!f) throw std::runtime_error("write_image: short write to " + tmp);
    }
    atomic_replace(tmp, path);
}

ImageBuffer read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_image: cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    f >> magic >> w >> h >> maxval;
    if (magic != "P6" || w < 1 || h < 1 || maxval != 255)
        throw std::runtime_error("read_image: unsupported PPM header in " + path);
    f.get();  // single whitespace after the header
    std::vector<uint8_t> bytes(static_cast<std::size_t>(3) * w * h);
    f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("read_image: truncated PPM data in " + path);
    return decode_bytes(bytes, w, h);
}

#ifdef JGS_HAS_PNG

void write_png(const ImageBuffer& img, const std::string& path) {
    const std::string tmp = path + ".tmp";
    FILE* fp = std::fopen(tmp.c_str(), "wb");
    if (!fp) throw std::runtime_error("write_image: cannot open " + tmp);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        std::remove(tmp.c_str());
        throw std::runtime_error("write_image: libpng failure writing " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const auto bytes = encode_bytes(img);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(&bytes[static_cast<std::size_t>(3) * y * img.width]));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    atomic_replace(tmp, path);
}

ImageBuffer read_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw std::runtime_error("read_image: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        std::fclose(fp);
        throw std::runtime_error("read_image: libpng failure reading " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    std::vector<uint8_t> bytes(static_cast<std::size_t>(3) * w * h);
    for (int y = 0; y < h; ++y)
        png_read_row(png, &bytes[static_cast<std::size_t>(3) * y * w], nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return decode_bytes(bytes, w, h);
}

#endif  // JGS_HAS_PNG

}  // namespace

void write_image(const ImageBuffer& buffer, const std::string& path) {
    if (buffer.width < 1 || buffer.height < 1)
        throw std::invalid_argument("write_image: empty buffer");
    if (has_suffix(path, ".ppm")) {
        write_ppm(buffer, path);
        return;
    }
#ifdef JGS_HAS_PNG
    write_png(buffer, path);
#else
    if (has_suffix(path, ".png"))
        throw std::runtime_error("write_image: built without PNG support, use .ppm: " + path);
    write_ppm(buffer, path);
#endif
}

ImageBuffer read_image(const std::string& path) {
    if (has_suffix(path, ".ppm")) return read_ppm(path);
#ifdef JGS_HAS_PNG
    return read_png(path);
#else
    throw std::runtime_error("read_image: built without PNG support, use .ppm: " + path);
#endif
}

}  // namespace jgs
