#include "protosum/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "protosum/kernels.hpp"

namespace protosum {

using kernels::Trans;

// -- ParameterSet ------------------------------------------------------------

ParamId ParameterSet::add(std::string name, Matrix init) {
    if (index_.contains(name)) {
        throw std::invalid_argument("duplicate parameter name: " + name);
    }
    index_.emplace(name, params_.size());
    params_.push_back(Parameter{std::move(name), std::move(init)});
    return ParamId{params_.size() - 1};
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

std::optional<ParamId> ParameterSet::find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return ParamId{it->second};
}

Gradients zero_gradients(const ParameterSet& params) {
    Gradients g;
    g.reserve(params.size());
    for (const auto& p : params) g.emplace_back(p.value.rows(), p.value.cols());
    return g;
}

void add_gradients(Gradients& into, const Gradients& from) {
    if (into.size() != from.size()) throw std::invalid_argument("add_gradients: size mismatch");
    for (std::size_t i = 0; i < into.size(); ++i) into[i].add_inplace(from[i]);
}

// -- Graph ---------------------------------------------------------------------

const Matrix& Var::value() const { return graph_->value(id_); }

double Var::scalar() const {
    const auto& v = value();
    if (v.size() != 1) throw std::invalid_argument("scalar(): node has shape " + v.shape_string());
    return v[0];
}

Graph::Graph(const ParameterSet* params, bool record) : params_(params), record_(record) {
    nodes_.reserve(256);
}

Var Graph::constant(Matrix value) {
    nodes_.push_back(Node{std::move(value), nullptr, {}, {}});
    return Var(this, nodes_.size() - 1);
}

Var Graph::param(ParamId id) {
    if (params_ == nullptr) throw std::logic_error("Graph::param: graph has no parameter set");
    if (auto it = param_nodes_.find(id.index); it != param_nodes_.end()) {
        return Var(this, it->second);
    }
    nodes_.push_back(Node{{}, &(*params_)[id].value, {}, {}});
    param_nodes_.emplace(id.index, nodes_.size() - 1);
    return Var(this, nodes_.size() - 1);
}

Var Graph::push(Matrix value, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), nullptr, {}, record_ ? std::move(backward) : nullptr});
    return Var(this, nodes_.size() - 1);
}

void Graph::truncate(std::size_t count) {
    if (count >= nodes_.size()) return;
    nodes_.resize(count);
    std::erase_if(param_nodes_, [count](const auto& kv) { return kv.second >= count; });
}

const Matrix& Graph::value(std::size_t id) const {
    const auto& n = nodes_[id];
    return n.external != nullptr ? *n.external : n.value;
}

Matrix& Graph::grad(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) {
        const auto& v = value(id);
        n.grad = Matrix(v.rows(), v.cols());
    }
    return n.grad;
}

void Graph::backward(Var loss) {
    if (!record_) throw std::logic_error("backward: graph was built without recording");
    if (loss.graph() != this) throw std::invalid_argument("backward: node from another graph");
    const auto& lv = value(loss.id());
    if (lv.size() != 1) {
        throw std::invalid_argument("backward: loss must be scalar, got " + lv.shape_string());
    }
    for (auto& n : nodes_) n.grad = Matrix();
    grad(loss.id())[0] = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        auto& n = nodes_[i];
        if (n.backward && !n.grad.empty()) n.backward(*this, i);
    }
}

void Graph::accumulate_param_grads(Gradients& out) const {
    for (const auto& [pidx, node] : param_nodes_) {
        const auto& g = nodes_[node].grad;
        if (!g.empty()) out.at(pidx).add_inplace(g);
    }
}

// -- ops -----------------------------------------------------------------------

namespace {

Graph& graph_of(std::initializer_list<Var> vars, const char* op) {
    Graph* g = nullptr;
    for (const auto& v : vars) {
        if (v.graph() == nullptr) throw std::invalid_argument(std::string(op) + ": null variable");
        if (g != nullptr && g != v.graph()) {
            throw std::invalid_argument(std::string(op) + ": variables from different graphs");
        }
        g = v.graph();
    }
    return *g;
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + a.shape_string() +
                                " and " + b.shape_string());
}

}  // namespace

Var matmul(Var a, Var b) {
    auto& g = graph_of({a, b}, "matmul");
    const auto& av = a.value();
    const auto& bv = b.value();
    if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
    const auto m = av.rows(), k = av.cols(), n = bv.cols();
    Matrix out(m, n);
    kernels::gemm(Trans::kNo, Trans::kNo, m, n, k, av.data(), bv.data(), out.data(), false);
    const auto ai = a.id(), bi = b.id();
    return g.push(std::move(out), [ai, bi, m, n, k](Graph& g, std::size_t self) {
        const auto& dc = g.grad(self);
        kernels::gemm(Trans::kNo, Trans::kYes, m, k, n, dc.data(), g.value(bi).data(),
                      g.grad(ai).data(), true);
        kernels::gemm(Trans::kYes, Trans::kNo, k, n, m, g.value(ai).data(), dc.data(),
                      g.grad(bi).data(), true);
    });
}

Var matmul_nt(Var a, Var b) {
    auto& g = graph_of({a, b}, "matmul_nt");
    const auto& av = a.value();
    const auto& bv = b.value();
    if (av.cols() != bv.cols()) shape_error("matmul_nt", av, bv);
    const auto m = av.rows(), k = av.cols(), n = bv.rows();
    Matrix out(m, n);
    kernels::gemm(Trans::kNo, Trans::kYes, m, n, k, av.data(), bv.data(), out.data(), false);
    const auto ai = a.id(), bi = b.id();
    return g.push(std::move(out), [ai, bi, m, n, k](Graph& g, std::size_t self) {
        const auto& dc = g.grad(self);
        kernels::gemm(Trans::kNo, Trans::kNo, m, k, n, dc.data(), g.value(bi).data(),
                      g.grad(ai).data(), true);
        kernels::gemm(Trans::kYes, Trans::kNo, n, k, m, dc.data(), g.value(ai).data(),
                      g.grad(bi).data(), true);
    });
}

Var add(Var a, Var b) {
    auto& g = graph_of({a, b}, "add");
    if (!a.value().same_shape(b.value())) shape_error("add", a.value(), b.value());
    Matrix out = a.value();
    out.add_inplace(b.value());
    const auto ai = a.id(), bi = b.id();
    return g.push(std::move(out), [ai, bi](Graph& g, std::size_t self) {
        const auto& d = g.grad(self);
        g.grad(ai).add_inplace(d);
        g.grad(bi).add_inplace(d);
    });
}

Var add_row(Var a, Var row) {
    auto& g = graph_of({a, row}, "add_row");
    const auto& av = a.value();
    const auto& rv = row.value();
    if (rv.rows() != 1 || rv.cols() != av.cols()) shape_error("add_row", av, rv);
    Matrix out = av;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += rv[c];
    }
    const auto ai = a.id(), ri = row.id();
    return g.push(std::move(out), [ai, ri](Graph& g, std::size_t self) {
        const auto& d = g.grad(self);
        g.grad(ai).add_inplace(d);
        auto& dr = g.grad(ri);
        for (std::size_t r = 0; r < d.rows(); ++r) {
            for (std::size_t c = 0; c < d.cols(); ++c) dr[c] += d(r, c);
        }
    });
}

Var sub(Var a, Var b) {
    auto& g = graph_of({a, b}, "sub");
    if (!a.value().same_shape(b.value())) shape_error("sub", a.value(), b.value());
    Matrix out = a.value();
    const auto& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    const auto ai = a.id(), bi = b.id();
    return g.push(std::move(out), [ai, bi](Graph& g, std::size_t self) {
        const auto& d = g.grad(self);
        g.grad(ai).add_inplace(d);
        auto& db = g.grad(bi);
        for (std::size_t i = 0; i < d.size(); ++i) db[i] -= d[i];
    });
}

Var hadamard(Var a, Var b) {
    auto& g = graph_of({a, b}, "hadamard");
    if (!a.value().same_shape(b.value())) shape_error("hadamard", a.value(), b.value());
    Matrix out = a.value();
    const auto& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    const auto ai = a.id(), bi = b.id();
    return g.push(std::move(out), [ai, bi](Graph& g, std::size_t self) {
        const auto& d = g.grad(self);
        const auto& av = g.value(ai);
        const auto& bv = g.value(bi);
        auto& da = g.grad(ai);
        for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i] * bv[i];
        auto& db = g.grad(bi);
        for (std::size_t i = 0; i < d.size(); ++i) db[i] += d[i] * av[i];
    });
}

Var scale(Var a, double s) {
    auto& g = graph_of({a}, "scale");
    Matrix out = a.value();
    for (auto& v : out.values()) v *= s;
    const auto ai = a.id();
    return g.push(std::move(out), [ai, s](Graph& g, std::size_t self) {
        const auto& d = g.grad(self);
        auto& da = g.grad(ai);
        for (std::size_t i = 0; i < d.size(); ++i) da[i] += s * d[i];
    });
}

Var relu(Var a) {
    auto& g = graph_of({a}, "relu");
    Matrix out = a.value();
    for (auto& v : out.values()) {
        g.note_branch(v > 0.0);
        v = v > 0.0 ? v : 0.0;
    }
    const auto ai = a.id();
    return g.push(std::move(out), [ai](Graph& g, std::size_t self) {
        const auto& d = g.grad(self);
        const auto& y = g.value(self);
        auto& da = g.grad(ai);
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (y[i] > 0.0) da[i] += d[i];
        }
    });
}

Var sigmoid(Var a) {
    auto& g = graph_of({a}, "sigmoid");
    Matrix out = a.value();
    for (auto& v : out.values()) {
        v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    const auto ai = a.id();
    return g.push(std::move(out), [ai](Graph& g, std::size_t self) {
        const auto& d = g.grad(self);
        const auto& y = g.value(self);
        auto& da = g.grad(ai);
        for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i] * y[i] * (1.0 - y[i]);
    });
}

Var softmax_rows(Var a, const Matrix* mask) {
    auto& g = graph_of({a}, "softmax_rows");
    const auto& av = a.value();
    if (mask != nullptr && !mask->same_shape(av)) shape_error("softmax_rows(mask)", av, *mask);
    Matrix out(av.rows(), av.cols());
    kernels::softmax_rows(av.rows(), av.cols(), av.data(),
                          mask != nullptr ? mask->data() : nullptr, out.data());
    const auto ai = a.id();
    return g.push(std::move(out), [ai](Graph& g, std::size_t self) {
        const auto& d = g.grad(self);
        const auto& y = g.value(self);
        auto& da = g.grad(ai);
        for (std::size_t r = 0; r < y.rows(); ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < y.cols(); ++c) dot += d(r, c) * y(r, c);
            for (std::size_t c = 0; c < y.cols(); ++c) da(r, c) += y(r, c) * (d(r, c) - dot);
        }
    });
}

Var layer_norm(Var a, Var gamma, Var beta, double eps) {
    auto& g = graph_of({a, gamma, beta}, "layer_norm");
    const auto& x = a.value();
    const auto& gv = gamma.value();
    const auto& bv = beta.value();
    if (gv.rows() != 1 || gv.cols() != x.cols()) shape_error("layer_norm(gamma)", x, gv);
    if (!bv.same_shape(gv)) shape_error("layer_norm(beta)", gv, bv);
    const auto rows = x.rows(), cols = x.cols();
    Matrix xhat(rows, cols);
    std::vector<double> inv_std(rows);
    Matrix out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double mu = 0.0;
        for (std::size_t c = 0; c < cols; ++c) mu += x(r, c);
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c) var += (x(r, c) - mu) * (x(r, c) - mu);
        var /= static_cast<double>(cols);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < cols; ++c) {
            xhat(r, c) = (x(r, c) - mu) * inv_std[r];
            out(r, c) = xhat(r, c) * gv[c] + bv[c];
        }
    }
    const auto ai = a.id(), gi = gamma.id(), bi = beta.id();
    return g.push(std::move(out), [ai, gi, bi, xhat = std::move(xhat),
                                   inv_std = std::move(inv_std)](Graph& g, std::size_t self) {
        const auto& d = g.grad(self);
        const auto& gv = g.value(gi);
        auto& dx = g.grad(ai);
        auto& dg = g.grad(gi);
        auto& db = g.grad(bi);
        const auto rows = d.rows(), cols = d.cols();
        const double inv_n = 1.0 / static_cast<double>(cols);
        for (std::size_t r = 0; r < rows; ++r) {
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
                const double dxh = d(r, c) * gv[c];
                sum_dxhat += dxh;
                sum_dxhat_xhat += dxh * xhat(r, c);
                dg[c] += d(r, c) * xhat(r, c);
                db[c] += d(r, c);
            }
            for (std::size_t c = 0; c < cols; ++c) {
                const double dxh = d(r, c) * gv[c];
                dx(r, c) += inv_std[r] *
                            (dxh - inv_n * sum_dxhat - xhat(r, c) * inv_n * sum_dxhat_xhat);
            }
        }
    });
}

Var embedding(Var table, const std::vector<int>& ids) {
    auto& g = graph_of({table}, "embedding");
    const auto& t = table.value();
    Matrix out(ids.size(), t.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= t.rows()) {
            throw std::invalid_argument("embedding: id " + std::to_string(ids[r]) +
                                        " outside table " + t.shape_string());
        }
        std::copy_n(t.data() + static_cast<std::size_t>(ids[r]) * t.cols(), t.cols(),
                    out.data() + r * t.cols());
    }
    const auto ti = table.id();
    return g.push(std::move(out), [ti, ids](Graph& g, std::size_t self) {
        const auto& d = g.grad(self);
        auto& dt = g.grad(ti);
        for (std::size_t r = 0; r < ids.size(); ++r) {
            const auto base = static_cast<std::size_t>(ids[r]) * dt.cols();
            for (std::size_t c = 0; c < dt.cols(); ++c) dt[base + c] += d(r, c);
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    Graph& g = *parts.front().graph();
    const auto rows = parts.front().rows();
    std::size_t cols = 0;
    for (const auto& p : parts) {
        if (p.graph() != &g) throw std::invalid_argument("concat_cols: variables from different graphs");
        if (p.rows() != rows) shape_error("concat_cols", parts.front().value(), p.value());
        cols += p.cols();
    }
    Matrix out(rows, cols);
    std::vector<std::size_t> ids, offsets;
    std::size_t off = 0;
    for (const auto& p : parts) {
        const auto& v = p.value();
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(v.data() + r * v.cols(), v.cols(), out.data() + r * cols + off);
        }
        ids.push_back(p.id());
        offsets.push_back(off);
        off += v.cols();
    }
    return g.push(std::move(out), [ids, offsets](Graph& g, std::size_t self) {
        const auto& d = g.grad(self);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            auto& dp = g.grad(ids[i]);
            for (std::size_t r = 0; r < dp.rows(); ++r) {
                for (std::size_t c = 0; c < dp.cols(); ++c) dp(r, c) += d(r, offsets[i] + c);
            }
        }
    });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
    auto& g = graph_of({a}, "slice_cols");
    const auto& av = a.value();
    if (start + count > av.cols()) {
        throw std::invalid_argument("slice_cols: columns [" + std::to_string(start) + "," +
                                    std::to_string(start + count) + ") outside " +
                                    av.shape_string());
    }
    Matrix out(av.rows(), count);
    for (std::size_t r = 0; r < av.rows(); ++r) {
        std::copy_n(av.data() + r * av.cols() + start, count, out.data() + r * count);
    }
    const auto ai = a.id();
    return g.push(std::move(out), [ai, start](Graph& g, std::size_t self) {
        const auto& d = g.grad(self);
        auto& da = g.grad(ai);
        for (std::size_t r = 0; r < d.rows(); ++r) {
            for (std::size_t c = 0; c < d.cols(); ++c) da(r, start + c) += d(r, c);
        }
    });
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
    auto& g = graph_of({a}, "slice_rows");
    const auto& av = a.value();
    if (start + count > av.rows()) {
        throw std::invalid_argument("slice_rows: rows [" + std::to_string(start) + "," +
                                    std::to_string(start + count) + ") outside " +
                                    av.shape_string());
    }
    Matrix out(count, av.cols());
    std::copy_n(av.data() + start * av.cols(), count * av.cols(), out.data());
    const auto ai = a.id();
    return g.push(std::move(out), [ai, start](Graph& g, std::size_t self) {
        const auto& d = g.grad(self);
        auto& da = g.grad(ai);
        const auto base = start * d.cols();
        for (std::size_t i = 0; i < d.size(); ++i) da[base + i] += d[i];
    });
}

Var sum(Var a) {
    auto& g = graph_of({a}, "sum");
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    const auto ai = a.id();
    return g.push(Matrix(1, 1, s), [ai](Graph& g, std::size_t self) {
        const double d = g.grad(self)[0];
        for (auto& v : g.grad(ai).values()) v += d;
    });
}

Var mean(Var a) {
    const auto n = a.value().size();
    if (n == 0) throw std::invalid_argument("mean: empty input");
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var log(Var a, double floor) {
    auto& g = graph_of({a}, "log");
    Matrix out = a.value();
    for (auto& v : out.values()) {
        g.note_branch(v > floor);
        if (!(v > floor)) {
            g.flag_floor();
            v = floor;
        }
        v = std::log(v);
    }
    const auto ai = a.id();
    return g.push(std::move(out), [ai, floor](Graph& g, std::size_t self) {
        const auto& d = g.grad(self);
        const auto& x = g.value(ai);
        auto& da = g.grad(ai);
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (x[i] > floor) da[i] += d[i] / x[i];
        }
    });
}

Var gather(Var a, const std::vector<std::pair<std::size_t, std::size_t>>& cells) {
    auto& g = graph_of({a}, "gather");
    const auto& av = a.value();
    Matrix out(cells.size(), 1);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto [r, c] = cells[i];
        if (r >= av.rows() || c >= av.cols()) {
            throw std::invalid_argument("gather: cell (" + std::to_string(r) + "," +
                                        std::to_string(c) + ") outside " + av.shape_string());
        }
        out[i] = av(r, c);
    }
    const auto ai = a.id();
    return g.push(std::move(out), [ai, cells](Graph& g, std::size_t self) {
        const auto& d = g.grad(self);
        auto& da = g.grad(ai);
        for (std::size_t i = 0; i < cells.size(); ++i) da(cells[i].first, cells[i].second) += d[i];
    });
}

Var gather_sum(Var a, const std::vector<std::vector<std::size_t>>& cols) {
    auto& g = graph_of({a}, "gather_sum");
    const auto& av = a.value();
    if (cols.size() != av.rows()) {
        throw std::invalid_argument("gather_sum: " + std::to_string(cols.size()) +
                                    " index lists for " + av.shape_string());
    }
    Matrix out(av.rows(), 1);
    for (std::size_t r = 0; r < av.rows(); ++r) {
        for (auto c : cols[r]) {
            if (c >= av.cols()) throw std::invalid_argument("gather_sum: column out of range");
            out[r] += av(r, c);
        }
    }
    const auto ai = a.id();
    return g.push(std::move(out), [ai, cols](Graph& g, std::size_t self) {
        const auto& d = g.grad(self);
        auto& da = g.grad(ai);
        for (std::size_t r = 0; r < cols.size(); ++r) {
            for (auto c : cols[r]) da(r, c) += d[r];
        }
    });
}

Var bce_with_logits(Var logits, const Matrix& targets) {
    auto& g = graph_of({logits}, "bce_with_logits");
    const auto& z = logits.value();
    if (!z.same_shape(targets)) shape_error("bce_with_logits", z, targets);
    if (z.empty()) throw std::invalid_argument("bce_with_logits: empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        // -[r log s(z) + (1-r) log(1-s(z))] = softplus(z) - r z
        const double softplus = std::max(z[i], 0.0) + std::log1p(std::exp(-std::abs(z[i])));
        total += softplus - targets[i] * z[i];
    }
    const double n = static_cast<double>(z.size());
    const auto zi = logits.id();
    return g.push(Matrix(1, 1, total / n), [zi, targets, n](Graph& g, std::size_t self) {
        const double d = g.grad(self)[0];
        const auto& z = g.value(zi);
        auto& dz = g.grad(zi);
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double s = z[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-z[i]))
                                         : std::exp(z[i]) / (1.0 + std::exp(z[i]));
            dz[i] += d * (s - targets[i]) / n;
        }
    });
}

}  // namespace protosum
