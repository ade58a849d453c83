#include "af/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace af {
namespace {

// Little-endian writers. The build targets little-endian hosts; a static
// assert would need std::endian at every include site, so check here once.
static_assert(__BYTE_ORDER__ == __ORDER_LITTLE_ENDIAN__,
              "checkpoint format is little-endian");

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

void put_tensor(std::ostream& os, const Tensor& t) {
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(float)));
}

}  // namespace

void save_checkpoint(const ParamStore& store, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
    os.write("LASR", 4);
    put<std::uint32_t>(os, kCheckpointVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(store.count()));
    for (const auto& [name, e] : store.entries()) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint8_t>(os, 0);  // dtype f32
        put<std::uint32_t>(os, static_cast<std::uint32_t>(e.value.rank()));
        for (int ext : e.value.shape()) put<std::uint32_t>(os, static_cast<std::uint32_t>(ext));
        put<std::int64_t>(os, e.step);
        put<float>(os, e.lr_scale);
        put_tensor(os, e.value);
        put_tensor(os, e.m);
        put_tensor(os, e.v);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

ParamStore load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "LASR", 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const auto version = take<std::uint32_t>(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " +
                                 std::to_string(version));
    const auto count = take<std::uint32_t>(is);
    ParamStore store;
    for (std::uint32_t r = 0; r < count; ++r) {
        const auto name_len = take<std::uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw std::runtime_error("checkpoint: truncated name");
        const auto dtype = take<std::uint8_t>(is);
        if (dtype != 0) throw std::runtime_error("checkpoint: unknown dtype tag");
        const auto rank = take<std::uint32_t>(is);
        std::vector<int> shape(rank);
        std::size_t n = 1;
        for (auto& ext : shape) {
            ext = static_cast<int>(take<std::uint32_t>(is));
            n *= static_cast<std::size_t>(ext);
        }
        const auto step = take<std::int64_t>(is);
        const auto lr_scale = take<float>(is);
        auto read_payload = [&] {
            std::vector<float> buf(n);
            is.read(reinterpret_cast<char*>(buf.data()),
                    static_cast<std::streamsize>(n * sizeof(float)));
            if (!is) throw std::runtime_error("checkpoint: truncated payload");
            return Tensor(shape, std::move(buf));
        };
        Tensor value = read_payload();
        Tensor m = read_payload();
        Tensor v = read_payload();
        store.add(name, std::move(value), lr_scale);
        auto& e = store.entries().at(name);
        e.m = std::move(m);
        e.v = std::move(v);
        e.step = step;
    }
    return store;
}

std::uint64_t store_checksum(const ParamStore& store) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto fold = [&h](const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [name, e] : store.entries()) {
        fold(name.data(), name.size());
        fold(e.value.data(), e.value.size() * sizeof(float));
    }
    return h;
}

}  // namespace af
