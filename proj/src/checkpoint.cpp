#include "protosum/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace protosum {

namespace fs = std::filesystem;

namespace {

void put_le(std::ofstream& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

double get_le(const unsigned char* bytes) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const fs::path& dir, const ParameterSet& params,
                     const nlohmann::json& metadata) {
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["format"] = kCheckpointFormat;
    manifest["params"] = nlohmann::json::array();
    std::size_t offset = 0;
    std::ofstream blob(dir / "params.bin", std::ios::binary | std::ios::trunc);
    if (!blob) throw std::runtime_error("cannot write " + (dir / "params.bin").string());
    for (const auto& p : params) {
        manifest["params"].push_back(
            {{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"offset", offset}});
        for (double v : p.value.values()) put_le(blob, v);
        offset += p.value.size();
    }
    manifest["metadata"] = metadata;
    std::ofstream mf(dir / "manifest.json", std::ios::trunc);
    if (!mf) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
    mf << manifest.dump(2) << '\n';
}

static nlohmann::json read_manifest(const fs::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw std::runtime_error("checkpoint manifest not found in " + dir.string());
    auto manifest = nlohmann::json::parse(mf);
    if (manifest.value("format", "") != kCheckpointFormat) {
        throw std::runtime_error("unrecognized checkpoint format in " + dir.string());
    }
    return manifest;
}

nlohmann::json load_checkpoint(const fs::path& dir, ParameterSet& params) {
    const auto manifest = read_manifest(dir);
    std::ifstream blob(dir / "params.bin", std::ios::binary);
    if (!blob) throw std::runtime_error("checkpoint blob not found in " + dir.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(blob)),
                                     std::istreambuf_iterator<char>());
    std::size_t loaded = 0;
    for (const auto& entry : manifest.at("params")) {
        const auto name = entry.at("name").get<std::string>();
        auto id = params.find(name);
        if (!id) throw std::runtime_error("checkpoint parameter not in model: " + name);
        auto& value = params[*id].value;
        const auto rows = entry.at("shape").at(0).get<std::size_t>();
        const auto cols = entry.at("shape").at(1).get<std::size_t>();
        if (rows != value.rows() || cols != value.cols()) {
            throw std::runtime_error("checkpoint shape mismatch for " + name + ": stored " +
                                     shape_string(rows, cols) + ", model " +
                                     value.shape_string());
        }
        const auto offset = entry.at("offset").get<std::size_t>();
        if ((offset + value.size()) * 8 > bytes.size()) {
            throw std::runtime_error("checkpoint blob truncated at " + name);
        }
        for (std::size_t i = 0; i < value.size(); ++i) {
            value[i] = get_le(bytes.data() + (offset + i) * 8);
        }
        ++loaded;
    }
    if (loaded != params.size()) {
        throw std::runtime_error("checkpoint in " + dir.string() + " holds " +
                                 std::to_string(loaded) + " of " +
                                 std::to_string(params.size()) + " model parameters");
    }
    return manifest.value("metadata", nlohmann::json::object());
}

nlohmann::json read_checkpoint_metadata(const fs::path& dir) {
    return read_manifest(dir).value("metadata", nlohmann::json::object());
}

bool checkpoint_exists(const fs::path& dir) {
    return fs::exists(dir / "manifest.json") && fs::exists(dir / "params.bin");
}

}  // namespace protosum
