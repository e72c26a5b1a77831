#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "doctest.h"
#include "protosum/checkpoint.hpp"
#include "protosum/nn.hpp"

using namespace protosum;
namespace fs = std::filesystem;

TEST_CASE("checkpoint save and load are bit-exact") {
    ParameterSet params;
    Rng rng(17);
    params.add("a", uniform_matrix(3, 4, 1.0, rng));
    params.add("b", uniform_matrix(1, 7, 1e-300, rng));
    params.at(1).value[0] = -0.0;
    const auto dir = fs::temp_directory_path() / "protosum_unit_ckpt";
    fs::remove_all(dir);
    CHECK_FALSE(checkpoint_exists(dir));
    save_checkpoint(dir, params, {{"note", "x"}});
    CHECK(checkpoint_exists(dir));

    ParameterSet back;
    back.add("a", Matrix(3, 4));
    back.add("b", Matrix(1, 7));
    const auto meta = load_checkpoint(dir, back);
    CHECK(meta.at("note") == "x");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& x = params.at(i).value;
        const auto& y = back.at(i).value;
        CHECK(std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0);
    }
    CHECK(read_checkpoint_metadata(dir).at("note") == "x");

    ParameterSet wrong;
    wrong.add("a", Matrix(4, 3));
    wrong.add("b", Matrix(1, 7));
    CHECK_THROWS(load_checkpoint(dir, wrong));
    ParameterSet missing;
    missing.add("c", Matrix(3, 4));
    CHECK_THROWS(load_checkpoint(dir, missing));
}

TEST_CASE("saving twice writes identical bytes") {
    ParameterSet params;
    Rng rng(3);
    params.add("w", uniform_matrix(5, 5, 1.0, rng));
    const auto a = fs::temp_directory_path() / "protosum_unit_ckpt_a";
    const auto b = fs::temp_directory_path() / "protosum_unit_ckpt_b";
    save_checkpoint(a, params, {});
    save_checkpoint(b, params, {});
    for (const char* f : {"manifest.json", "params.bin"}) {
        std::ifstream x(a / f, std::ios::binary), y(b / f, std::ios::binary);
        const std::string sx((std::istreambuf_iterator<char>(x)), {});
        const std::string sy((std::istreambuf_iterator<char>(y)), {});
        CHECK(sx == sy);
        CHECK(!sx.empty());
    }
}
