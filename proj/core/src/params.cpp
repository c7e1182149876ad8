#include "funs/params.hpp"

#include <cstring>
#include <fstream>

namespace funs {

namespace {
constexpr char kMagic[8] = {'F', 'U', 'N', 'S', 'P', 'R', 'M', '1'};

void write_u64(std::ostream& os, uint64_t x) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((x >> (8 * i)) & 0xff);
    os.write(buf, 8);
}

uint64_t read_u64(std::istream& is) {
    char buf[8];
    is.read(buf, 8);
    uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return x;
}
}  // namespace

void save_params(const ParamSet& params, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_params: cannot open " + path);
    os.write(kMagic, 8);
    write_u64(os, static_cast<uint64_t>(params.count()));
    for (const auto& e : params.entries()) {
        write_u64(os, e.name.size());
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_u64(os, static_cast<uint64_t>(e.value.rows));
        write_u64(os, static_cast<uint64_t>(e.value.cols));
        for (double x : e.value.v) {
            uint64_t bits;
            std::memcpy(&bits, &x, 8);
            write_u64(os, bits);
        }
    }
    if (!os) throw std::runtime_error("save_params: write failed for " + path);
}

void load_params(ParamSet& params, const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_params: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("load_params: bad magic in " + path);
    const uint64_t count = read_u64(is);
    if (count != static_cast<uint64_t>(params.count()))
        throw std::runtime_error("load_params: parameter count mismatch in " + path);
    for (auto& e : params.entries()) {
        const uint64_t name_len = read_u64(is);
        std::string name(name_len, '\0');
        is.read(name.data(), static_cast<std::streamsize>(name_len));
        if (name != e.name)
            throw std::runtime_error("load_params: expected parameter " + e.name + ", found " + name);
        const uint64_t rows = read_u64(is);
        const uint64_t cols = read_u64(is);
        if (rows != static_cast<uint64_t>(e.value.rows) || cols != static_cast<uint64_t>(e.value.cols))
            throw std::runtime_error("load_params: shape mismatch for " + e.name);
        for (double& x : e.value.v) {
            const uint64_t bits = read_u64(is);
            std::memcpy(&x, &bits, 8);
        }
    }
    if (!is) throw std::runtime_error("load_params: truncated file " + path);
}

}  // namespace funs
