#include "core/pgm.hpp"

#include <cctype>
#include <fstream>

#include "core/errors.hpp"

namespace oandet {

void write_pgm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& pixels) {
    if (width <= 0 || height <= 0) throw ValidationError("pgm dimensions must be positive");
    if (pixels.size() != static_cast<std::size_t>(width) * height) {
        throw ValidationError("pgm pixel count does not match dimensions");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open image for writing", path);
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    if (!out) throw IoError("failed writing image", path);
}

namespace {

// Reads one whitespace-delimited token, skipping '#' comment lines, which the
// format allows even though we never write them.
bool next_token(std::istream& in, std::string& token) {
    token.clear();
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!token.empty()) return true;
            continue;
        }
        token.push_back(static_cast<char>(c));
    }
    return !token.empty();
}

int parse_dim(const std::string& token, const std::string& path) {
    try {
        const int v = std::stoi(token);
        if (v <= 0) throw IoError("non-positive dimension in pgm header", path);
        return v;
    } catch (const IoError&) {
        throw;
    } catch (...) {
        throw IoError("malformed pgm header", path);
    }
}

} // namespace

PgmImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image", path);

    std::string token;
    if (!next_token(in, token) || token != "P5") {
        throw IoError("not a binary pgm (missing P5 magic)", path);
    }
    PgmImage img;
    if (!next_token(in, token)) throw IoError("malformed pgm header", path);
    img.width = parse_dim(token, path);
    if (!next_token(in, token)) throw IoError("malformed pgm header", path);
    img.height = parse_dim(token, path);
    if (!next_token(in, token)) throw IoError("malformed pgm header", path);
    if (token != "255") throw IoError("unsupported pgm maxval (want 255)", path);

    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
        throw IoError("truncated pgm pixel data", path);
    }
    return img;
}

} // namespace oandet
