#include "io/label_png.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

#include "tensor/error.hpp"

namespace sephr {

namespace {

png_color class_colour(std::size_t c) {
    static const png_color base[] = {{230, 159, 0},  {86, 180, 233},  {0, 158, 115},  {240, 228, 66},
                                     {0, 114, 178},  {213, 94, 0},    {204, 121, 167}, {120, 120, 120},
                                     {153, 102, 51}, {255, 255, 255}, {0, 0, 0},       {102, 0, 153}};
    constexpr std::size_t n = sizeof base / sizeof base[0];
    if (c < n) return base[c];
    // Beyond the fixed table, spread hues with a golden-ratio walk.
    const double h = static_cast<double>(c) * 0.618033988749895;
    const double f = h - static_cast<long>(h);
    auto channel = [&](double offset) {
        double x = f + offset;
        x -= static_cast<long>(x);
        const double v = x < 0.5 ? 2.0 * x : 2.0 - 2.0 * x;
        return static_cast<png_byte>(40 + 200 * v);
    };
    return {channel(0.0), channel(1.0 / 3.0), channel(2.0 / 3.0)};
}

}  // namespace

void write_label_png(const std::string& path, std::span<const std::int32_t> labels, std::size_t height,
                     std::size_t width, std::size_t classes) {
    SEPHR_CHECK(labels.size() == height * width && height > 0 && width > 0, ErrorKind::config, "label map has ",
                labels.size(), " pixels, expected ", height, "x", width);
    SEPHR_CHECK(classes >= 1 && classes <= 256, ErrorKind::config, "paletted maps hold at most 256 classes, got ",
                classes);
    for (std::size_t i = 0; i < labels.size(); ++i)
        SEPHR_CHECK(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < classes, ErrorKind::data, "label ",
                    labels[i], " at pixel ", i, " outside [0, ", classes, ")");

    std::vector<png_color> palette(classes);
    for (std::size_t c = 0; c < classes; ++c) palette[c] = class_colour(c);
    std::vector<png_byte> pixels(labels.begin(), labels.end());
    std::vector<png_bytep> rows(height);
    for (std::size_t y = 0; y < height; ++y) rows[y] = pixels.data() + y * width;

    std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
    SEPHR_CHECK(file != nullptr, ErrorKind::io, "cannot write '", path, "'");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    SEPHR_CHECK(png != nullptr, ErrorKind::io, "png writer unavailable");
    png_infop info = png_create_info_struct(png);
    // Everything with a destructor exists before setjmp, so the jump skips none.
    if (info == nullptr || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        detail::raise(ErrorKind::io, "failed to encode '", path, "'");
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 PNG_COLOR_TYPE_PALETTE, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_PLTE(png, info, palette.data(), static_cast<int>(classes));
    png_set_rows(png, info, rows.data());
    png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace sephr
