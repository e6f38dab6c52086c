#include "cvrp/policy/weights.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace cvrp::policy {

namespace {

constexpr char kMagic[8] = {'C', 'V', 'R', 'P', 'P', 'O', 'L', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t x) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double x) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return x;
}

double get_f64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_weights(const std::string& path, const PolicyParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw WeightsError("cannot open weight file for writing: " + path);
    out.write(kMagic, 8);
    put_u32(out, kVersion);
    put_u32(out, params.config.problem == ProblemKind::Cvrp ? 0 : 1);
    put_u32(out, static_cast<std::uint32_t>(params.config.embedding_dim));
    put_u32(out, static_cast<std::uint32_t>(params.config.encoder_layers));
    put_u32(out, static_cast<std::uint32_t>(params.config.num_heads));
    put_u32(out, static_cast<std::uint32_t>(params.config.ff_dim));

    std::uint32_t count = 0;
    params.visit([&](const std::string&, const Mat&) { ++count; });
    put_u32(out, count);
    params.visit([&](const std::string& name, const Mat& m) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(out, static_cast<std::uint32_t>(m.rows));
        put_u32(out, static_cast<std::uint32_t>(m.cols));
        for (double x : m.v) put_f64(out, x);
    });
    if (!out) throw WeightsError("write failed: " + path);
}

PolicyParams load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WeightsError("cannot open weight file: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw WeightsError("not a policy weight file: " + path);
    std::uint32_t version = get_u32(in);
    if (version != kVersion)
        throw WeightsError("unsupported weight file version " + std::to_string(version));
    PolicyConfig config;
    config.problem = get_u32(in) == 0 ? ProblemKind::Cvrp : ProblemKind::Tsp;
    config.embedding_dim = static_cast<int>(get_u32(in));
    config.encoder_layers = static_cast<int>(get_u32(in));
    config.num_heads = static_cast<int>(get_u32(in));
    config.ff_dim = static_cast<int>(get_u32(in));
    config.check();

    PolicyParams params = init_params(config, 0);
    std::uint32_t count = get_u32(in);
    std::uint32_t expected = 0;
    params.visit([&](const std::string&, const Mat&) { ++expected; });
    if (count != expected)
        throw WeightsError("tensor count mismatch in " + path);
    params.visit([&](const std::string& name, Mat& m) {
        std::uint32_t len = get_u32(in);
        std::string stored(len, '\0');
        in.read(stored.data(), len);
        std::uint32_t rows = get_u32(in), cols = get_u32(in);
        if (stored != name || static_cast<int>(rows) != m.rows ||
            static_cast<int>(cols) != m.cols)
            throw WeightsError("tensor layout mismatch at '" + stored + "' in " + path);
        for (double& x : m.v) x = get_f64(in);
    });
    if (!in) throw WeightsError("truncated weight file: " + path);
    return params;
}

void save_sidecar(const std::string& weights_path, const std::string& json_text) {
    std::ofstream out(weights_path + ".json");
    if (!out) throw WeightsError("cannot write sidecar for: " + weights_path);
    out << json_text << "\n";
}

}  // namespace cvrp::policy
