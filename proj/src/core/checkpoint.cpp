#include "core/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <limits>

#include "core/errors.hpp"

namespace oandet {

namespace {

constexpr char kMagic[8] = {'O', 'A', 'N', 'C', 'K', 'P', 'T', '1'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Parser {
    const std::uint8_t* p;
    std::size_t left;
    const std::string& path;

    void need(std::size_t n) const {
        if (left < n) throw IoError("truncated checkpoint", path);
    }
    std::uint16_t u16() { need(2); std::uint16_t v = static_cast<std::uint16_t>(p[0] | (p[1] << 8)); p += 2; left -= 2; return v; }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        p += 4; left -= 4;
        return v;
    }
    std::uint8_t u8() { need(1); std::uint8_t v = p[0]; ++p; --left; return v; }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

} // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
    const auto* bytes = static_cast<const std::uint8_t*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= kFnvPrime;
    }
    return h;
}

void write_checkpoint(const std::string& path,
                      const std::vector<CheckpointEntry>& entries) {
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), kMagic, kMagic + 8);
    put_u32(buf, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        if (e.name.size() > std::numeric_limits<std::uint16_t>::max()) {
            throw ValidationError("checkpoint entry name too long: " + e.name);
        }
        if (e.dims.size() > 255) {
            throw ValidationError("checkpoint entry rank too large: " + e.name);
        }
        put_u16(buf, static_cast<std::uint16_t>(e.name.size()));
        buf.insert(buf.end(), e.name.begin(), e.name.end());
        buf.push_back(static_cast<std::uint8_t>(e.dims.size()));
        std::size_t count = 1;
        for (int d : e.dims) {
            if (d < 0) throw ValidationError("negative dim in checkpoint entry " + e.name);
            put_u32(buf, static_cast<std::uint32_t>(d));
            count *= static_cast<std::size_t>(d);
        }
        if (count != e.values.size()) {
            throw ValidationError("checkpoint entry " + e.name +
                                  " value count does not match dims");
        }
        for (float v : e.values) put_f32(buf, v);
    }
    put_u64(buf, fnv1a64(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing", path);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("failed writing checkpoint", path);
}

std::vector<CheckpointEntry> read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint", path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
    if (buf.size() < 8 + 4 + 8) throw IoError("truncated checkpoint", path);
    if (std::memcmp(buf.data(), kMagic, 8) != 0) {
        throw IoError("bad checkpoint magic", path);
    }
    const std::size_t body = buf.size() - 8;
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(buf[body + i]) << (8 * i);
    if (fnv1a64(buf.data(), body) != stored) {
        throw IoError("checkpoint checksum mismatch", path);
    }

    Parser parser{buf.data() + 8, body - 8, path};
    const std::uint32_t count = parser.u32();
    std::vector<CheckpointEntry> entries;
    entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        CheckpointEntry e;
        const std::uint16_t name_len = parser.u16();
        parser.need(name_len);
        e.name.assign(reinterpret_cast<const char*>(parser.p), name_len);
        parser.p += name_len;
        parser.left -= name_len;
        const std::uint8_t rank = parser.u8();
        std::size_t numel = 1;
        for (int d = 0; d < rank; ++d) {
            const std::uint32_t dim = parser.u32();
            e.dims.push_back(static_cast<int>(dim));
            if (dim != 0 && numel > parser.left / dim) {
                throw IoError("oversized entry in checkpoint", path);
            }
            numel *= dim;
        }
        parser.need(numel * 4);
        e.values.resize(numel);
        for (std::size_t v = 0; v < numel; ++v) e.values[v] = parser.f32();
        entries.push_back(std::move(e));
    }
    if (parser.left != 0) throw IoError("trailing bytes in checkpoint", path);
    return entries;
}

std::uint64_t checkpoint_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint", path);
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    if (size < 8) throw IoError("truncated checkpoint", path);
    in.seekg(size - static_cast<std::streamoff>(8));
    std::uint8_t tail[8];
    in.read(reinterpret_cast<char*>(tail), 8);
    if (!in) throw IoError("failed reading checkpoint", path);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(tail[i]) << (8 * i);
    return v;
}

const CheckpointEntry* find_entry(const std::vector<CheckpointEntry>& entries,
                                  const std::string& name) {
    for (const auto& e : entries) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

} // namespace oandet
