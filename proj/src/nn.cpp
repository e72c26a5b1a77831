#include "protosum/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace protosum {

std::size_t Rng::below(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below(0)");
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
}

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
    Matrix m(rows, cols);
    for (auto& v : m.values()) v = rng.uniform(-bound, bound);
    return m;
}

Matrix positional_encoding(std::size_t length, std::size_t dim) {
    Matrix pe(length, dim);
    for (std::size_t pos = 0; pos < length; ++pos) {
        for (std::size_t i = 0; i < dim; i += 2) {
            const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
            pe(pos, i) = std::sin(static_cast<double>(pos) * freq);
            if (i + 1 < dim) pe(pos, i + 1) = std::cos(static_cast<double>(pos) * freq);
        }
    }
    return pe;
}

Matrix causal_mask(std::size_t length) {
    Matrix m(length, length);
    for (std::size_t r = 0; r < length; ++r) {
        for (std::size_t c = r + 1; c < length; ++c) m(r, c) = kMaskedLogit;
    }
    return m;
}

Linear Linear::create(ParameterSet& params, const std::string& name, std::size_t in,
                      std::size_t out, Rng& rng, bool with_bias) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    Linear l;
    l.weight = params.add(name + ".weight", uniform_matrix(in, out, bound, rng));
    if (with_bias) l.bias = params.add(name + ".bias", Matrix(1, out));
    l.in = in;
    l.out = out;
    return l;
}

Var Linear::operator()(Graph& g, Var x) const {
    Var y = matmul(x, g.param(weight));
    return bias ? add_row(y, g.param(*bias)) : y;
}

LayerNorm LayerNorm::create(ParameterSet& params, const std::string& name, std::size_t dim) {
    LayerNorm ln;
    ln.gamma = params.add(name + ".gamma", Matrix(1, dim, 1.0));
    ln.beta = params.add(name + ".beta", Matrix(1, dim));
    return ln;
}

Var LayerNorm::operator()(Graph& g, Var x) const {
    return layer_norm(x, g.param(gamma), g.param(beta));
}

FeedForward FeedForward::create(ParameterSet& params, const std::string& name, std::size_t dim,
                                std::size_t width, Rng& rng) {
    return FeedForward{Linear::create(params, name + ".hidden", dim, width, rng),
                       Linear::create(params, name + ".output", width, dim, rng)};
}

Var FeedForward::operator()(Graph& g, Var x) const { return output(g, relu(hidden(g, x))); }

MultiHeadAttention MultiHeadAttention::create(ParameterSet& params, const std::string& name,
                                              std::size_t dim, std::size_t heads, Rng& rng) {
    if (heads == 0 || dim % heads != 0) {
        throw std::invalid_argument("multi-head attention: model dimension " +
                                    std::to_string(dim) + " not divisible by " +
                                    std::to_string(heads) + " heads");
    }
    MultiHeadAttention m;
    m.query = Linear::create(params, name + ".query", dim, dim, rng);
    m.key = Linear::create(params, name + ".key", dim, dim, rng, false);
    m.value = Linear::create(params, name + ".value", dim, dim, rng);
    m.project = Linear::create(params, name + ".project", dim, dim, rng);
    m.heads = heads;
    return m;
}

AttentionOutput MultiHeadAttention::operator()(Graph& g, Var queries, Var memory,
                                               const Matrix* mask) const {
    const auto dim = query.out;
    if (dim % heads != 0) {
        throw std::invalid_argument("multi-head attention: model dimension " +
                                    std::to_string(dim) + " not divisible by " +
                                    std::to_string(heads) + " heads");
    }
    const auto head_dim = dim / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
    Var q = query(g, queries);
    Var k = key(g, memory);
    Var v = value(g, memory);
    AttentionOutput result;
    std::vector<Var> contexts;
    contexts.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        Var qh = heads == 1 ? q : slice_cols(q, h * head_dim, head_dim);
        Var kh = heads == 1 ? k : slice_cols(k, h * head_dim, head_dim);
        Var vh = heads == 1 ? v : slice_cols(v, h * head_dim, head_dim);
        Var w = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt), mask);
        result.weights.push_back(w);
        contexts.push_back(matmul(w, vh));
    }
    Var joined = heads == 1 ? contexts.front() : concat_cols(contexts);
    result.output = project(g, joined);
    return result;
}

EncoderBlock EncoderBlock::create(ParameterSet& params, const std::string& name,
                                  std::size_t dim, std::size_t heads, std::size_t ffn_width,
                                  Rng& rng) {
    EncoderBlock b;
    b.self_attention = MultiHeadAttention::create(params, name + ".self_attn", dim, heads, rng);
    b.norm1 = LayerNorm::create(params, name + ".norm1", dim);
    b.ffn = FeedForward::create(params, name + ".ffn", dim, ffn_width, rng);
    b.norm2 = LayerNorm::create(params, name + ".norm2", dim);
    return b;
}

AttentionOutput EncoderBlock::operator()(Graph& g, Var x, const Matrix* mask) const {
    auto attn = self_attention(g, x, x, mask);
    Var h = norm1(g, add(x, attn.output));
    attn.output = norm2(g, add(h, ffn(g, h)));
    return attn;
}

CrossBlock CrossBlock::create(ParameterSet& params, const std::string& name, std::size_t dim,
                              std::size_t heads, std::size_t ffn_width, Rng& rng) {
    CrossBlock b;
    b.self_attention = MultiHeadAttention::create(params, name + ".self_attn", dim, heads, rng);
    b.norm1 = LayerNorm::create(params, name + ".norm1", dim);
    b.memory_attention = MultiHeadAttention::create(params, name + ".mem_attn", dim, heads, rng);
    b.norm2 = LayerNorm::create(params, name + ".norm2", dim);
    b.ffn = FeedForward::create(params, name + ".ffn", dim, ffn_width, rng);
    b.norm3 = LayerNorm::create(params, name + ".norm3", dim);
    return b;
}

AttentionOutput CrossBlock::operator()(Graph& g, Var x, Var memory,
                                       const Matrix* self_mask) const {
    auto self = self_attention(g, x, x, self_mask);
    Var h = norm1(g, add(x, self.output));
    auto cross = memory_attention(g, h, memory);
    h = norm2(g, add(h, cross.output));
    cross.output = norm3(g, add(h, ffn(g, h)));
    return cross;
}

}  // namespace protosum
