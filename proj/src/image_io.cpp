#include "sdfsplat/image_io.hpp"

#include "sdfsplat/error.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little, "PFM and PLY IO assume a little-endian host");

namespace sdfsplat {

namespace {

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void write_png(const Image& img, const std::filesystem::path& path) {
    if (img.channels != 3 || img.empty()) throw ContractViolation("write_png: expected a non-empty RGB image");
    std::vector<std::uint8_t> bytes(img.data.size());
    std::transform(img.data.begin(), img.data.end(), bytes.begin(), to_byte);
    png_image info;
    std::memset(&info, 0, sizeof(info));
    info.version = PNG_IMAGE_VERSION;
    info.width = static_cast<png_uint_32>(img.width);
    info.height = static_cast<png_uint_32>(img.height);
    info.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&info, path.string().c_str(), 0, bytes.data(), 0, nullptr))
        throw IoError("cannot write PNG " + path.string() + ": " + info.message);
}

Image read_png(const std::filesystem::path& path) {
    png_image info;
    std::memset(&info, 0, sizeof(info));
    info.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&info, path.string().c_str()))
        throw IoError("cannot read PNG " + path.string() + ": " + info.message);
    info.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(info));
    if (!png_image_finish_read(&info, nullptr, bytes.data(), 0, nullptr)) {
        png_image_free(&info);
        throw FormatError("cannot decode PNG " + path.string() + ": " + info.message);
    }
    Image img(static_cast<int>(info.width), static_cast<int>(info.height), 3);
    for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0;
    return img;
}

void write_pfm(const Image& img, const std::filesystem::path& path) {
    if (img.channels != 1 && img.channels != 3) throw ContractViolation("write_pfm: expected 1 or 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write PFM " + path.string());
    out << (img.channels == 3 ? "PF" : "Pf") << "\n" << img.width << " " << img.height << "\n-1.0\n";
    std::vector<float> row(static_cast<std::size_t>(img.width) * img.channels);
    // PFM rows run bottom to top.
    for (int y = img.height - 1; y >= 0; --y) {
        for (std::size_t i = 0; i < row.size(); ++i) row[i] = static_cast<float>(img.data[img.index(0, y) + i]);
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw IoError("failed writing PFM " + path.string());
}

Image read_pfm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read PFM " + path.string());
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    in.get();
    if ((magic != "PF" && magic != "Pf") || !in || w <= 0 || h <= 0)
        throw FormatError("malformed PFM header in " + path.string());
    if (scale >= 0.0) throw FormatError("big-endian PFM not supported: " + path.string());
    const int channels = magic == "PF" ? 3 : 1;
    Image img(w, h, channels);
    std::vector<float> row(static_cast<std::size_t>(w) * channels);
    for (int y = h - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw FormatError("truncated PFM " + path.string());
        for (std::size_t i = 0; i < row.size(); ++i) img.data[img.index(0, y) + i] = row[i];
    }
    return img;
}

void quantize_to_float(Image& img) {
    for (double& v : img.data) v = static_cast<float>(v);
}

void quantize_to_8bit(Image& img) {
    for (double& v : img.data) v = to_byte(v) / 255.0;
}

}  // namespace sdfsplat
