#include "admf/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "admf/common.hpp"

namespace admf {

namespace {

constexpr char kMagic[8] = {'A', 'D', 'M', 'F', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError(path + ": truncated checkpoint");
    return v;
}

std::ifstream open_and_check(const std::string& path, std::uint64_t* json_len) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        throw DataError(path + ": not an ADMF checkpoint");
    }
    const auto version = read_pod<std::uint32_t>(in, path);
    if (version != kVersion) {
        throw DataError(path + ": unsupported checkpoint version " +
                        std::to_string(version));
    }
    *json_len = read_pod<std::uint64_t>(in, path);
    return in;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& config_echo,
                     const nn::ParamStore& store) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out.write(kMagic, 8);
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint64_t>(config_echo.size()));
    out.write(config_echo.data(), static_cast<std::streamsize>(config_echo.size()));
    write_pod(out, static_cast<std::uint64_t>(store.items().size()));
    for (const auto& p : store.items()) {
        write_pod(out, static_cast<std::uint32_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_pod(out, static_cast<std::uint32_t>(p->value.shape().size()));
        for (int d : p->value.shape()) write_pod(out, static_cast<std::uint64_t>(d));
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    }
    if (!out) throw DataError("write failed: " + path);
}

std::string load_checkpoint(const std::string& path, nn::ParamStore& store) {
    std::uint64_t json_len = 0;
    std::ifstream in = open_and_check(path, &json_len);
    std::string echo(json_len, '\0');
    in.read(echo.data(), static_cast<std::streamsize>(json_len));
    const auto n_tensors = read_pod<std::uint64_t>(in, path);
    if (n_tensors != store.items().size()) {
        throw DataError(path + ": tensor count " + std::to_string(n_tensors) +
                        " does not match model (" +
                        std::to_string(store.items().size()) + ")");
    }
    for (const auto& p : store.items()) {
        const auto name_len = read_pod<std::uint32_t>(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (name != p->name) {
            throw DataError(path + ": expected tensor '" + p->name + "', found '" +
                            name + "'");
        }
        const auto ndim = read_pod<std::uint32_t>(in, path);
        if (ndim != p->value.shape().size()) {
            throw DataError(path + ": rank mismatch for " + name);
        }
        for (int d : p->value.shape()) {
            if (read_pod<std::uint64_t>(in, path) != static_cast<std::uint64_t>(d)) {
                throw DataError(path + ": shape mismatch for " + name);
            }
        }
        in.read(reinterpret_cast<char*>(p->value.data()),
                static_cast<std::streamsize>(p->value.size() * sizeof(double)));
        if (!in) throw DataError(path + ": truncated tensor data for " + name);
    }
    return echo;
}

std::string read_checkpoint_config(const std::string& path) {
    std::uint64_t json_len = 0;
    std::ifstream in = open_and_check(path, &json_len);
    std::string echo(json_len, '\0');
    in.read(echo.data(), static_cast<std::streamsize>(json_len));
    if (!in) throw DataError(path + ": truncated config echo");
    return echo;
}

}  // namespace admf
