#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace oandet {

struct PgmImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;
};

// Binary PGM (P5), maxval 255. The header is written as exactly
// "P5\n<width> <height>\n255\n" so files are byte-reproducible.
void write_pgm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& pixels);

PgmImage read_pgm(const std::string& path);

} // namespace oandet
