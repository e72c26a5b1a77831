#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "protosum/autodiff.hpp"

namespace protosum {

// Seedable generator with a portable double conversion (53 random mantissa bits),
// so parameter initialization is identical across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [0, n).
    std::size_t below(std::size_t n);
    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

  private:
    std::mt19937_64 engine_;
};

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng);

// Sinusoidal position table, one row per position.
Matrix positional_encoding(std::size_t length, std::size_t dim);
// Additive mask hiding future positions (query t may attend keys 0..t).
Matrix causal_mask(std::size_t length);

struct Linear {
    ParamId weight;               // in x out
    std::optional<ParamId> bias;  // 1 x out
    std::size_t in = 0;
    std::size_t out = 0;

    static Linear create(ParameterSet& params, const std::string& name, std::size_t in,
                         std::size_t out, Rng& rng, bool with_bias = true);
    Var operator()(Graph& g, Var x) const;
};

struct LayerNorm {
    ParamId gamma;
    ParamId beta;

    static LayerNorm create(ParameterSet& params, const std::string& name, std::size_t dim);
    Var operator()(Graph& g, Var x) const;
};

struct FeedForward {
    Linear hidden;
    Linear output;

    static FeedForward create(ParameterSet& params, const std::string& name, std::size_t dim,
                              std::size_t width, Rng& rng);
    Var operator()(Graph& g, Var x) const;
};

struct AttentionOutput {
    Var output;                // query_len x dim
    std::vector<Var> weights;  // one query_len x key_len matrix per head
    Var head0() const { return weights.front(); }
};

// The key projection has no bias: a shared key offset shifts every score of a
// query row equally and cancels in the softmax.
struct MultiHeadAttention {
    Linear query;
    Linear key;
    Linear value;
    Linear project;
    std::size_t heads = 1;

    static MultiHeadAttention create(ParameterSet& params, const std::string& name,
                                     std::size_t dim, std::size_t heads, Rng& rng);
    AttentionOutput operator()(Graph& g, Var queries, Var memory,
                               const Matrix* mask = nullptr) const;
};

// Post-norm transformer encoder block: self-attention then feed-forward.
struct EncoderBlock {
    MultiHeadAttention self_attention;
    LayerNorm norm1;
    FeedForward ffn;
    LayerNorm norm2;

    static EncoderBlock create(ParameterSet& params, const std::string& name, std::size_t dim,
                               std::size_t heads, std::size_t ffn_width, Rng& rng);
    AttentionOutput operator()(Graph& g, Var x, const Matrix* mask = nullptr) const;
};

// Self-attention, attention over an external memory, then feed-forward. Used
// both by the dual encoder (no mask) and by the decoder (causal self mask).
// The returned weights are those of the memory attention.
struct CrossBlock {
    MultiHeadAttention self_attention;
    LayerNorm norm1;
    MultiHeadAttention memory_attention;
    LayerNorm norm2;
    FeedForward ffn;
    LayerNorm norm3;

    static CrossBlock create(ParameterSet& params, const std::string& name, std::size_t dim,
                             std::size_t heads, std::size_t ffn_width, Rng& rng);
    AttentionOutput operator()(Graph& g, Var x, Var memory,
                               const Matrix* self_mask = nullptr) const;
};

}  // namespace protosum
