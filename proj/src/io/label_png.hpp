#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace sephr {

// Writes an 8-bit paletted PNG, one palette entry per class.
void write_label_png(const std::string& path, std::span<const std::int32_t> labels, std::size_t height,
                     std::size_t width, std::size_t classes);

}  // namespace sephr
