#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "freqflow/errors.hpp"
#include "freqflow/fft.hpp"
#include "freqflow/tensor.hpp"

namespace freqflow::ad {

// A trainable tensor. Complex parameters store interleaved (re, im) pairs and
// receive gradients in the split-real convention: value and grad always have
// identical layout and length.
struct Parameter {
    std::string name;
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool is_complex = false;
    bool trainable = true;
    bool decay_exempt = false;

    Parameter() = default;
    Parameter(std::string n, Shape s, bool complex_valued = false)
        : name(std::move(n)), shape(std::move(s)), is_complex(complex_valued) {
        value.assign(storage_size(), 0.0);
        grad.assign(storage_size(), 0.0);
    }

    std::size_t storage_size() const { return shape_numel(shape) * (is_complex ? 2 : 1); }
    void zero_grad() { grad.assign(grad.size(), 0.0); }
};

class Tape;

struct Var {
    Tape* tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

// Define-by-run adjoint graph: a flat op tape. Forward values are computed
// eagerly as ops are recorded; backward() walks the record once in reverse.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var input(RealArray arr) { return make(arr.shape(), std::move(arr.vec()), false); }
    Var input_scalar(double v) { return make(Shape{1}, std::vector<double>{v}, false); }

    Var param(Parameter& p) {
        Shape s = p.is_complex ? [&] {
            Shape t = p.shape;
            t.push_back(2);
            return t;
        }()
                               : p.shape;
        Var v = make(std::move(s), std::vector<double>(p.value), p.trainable);
        nodes_[v.id].bound = &p;
        return v;
    }

    const Shape& shape(Var v) const { return nodes_.at(v.id).shape; }
    const std::vector<double>& data(Var v) const { return nodes_.at(v.id).value; }
    RealArray array(Var v) const { return RealArray(nodes_.at(v.id).shape, nodes_.at(v.id).value); }
    double scalar(Var v) const {
        const auto& n = nodes_.at(v.id);
        if (n.value.size() != 1) throw ContractError("scalar(): node is not a scalar");
        return n.value[0];
    }

    void backward(Var loss) {
        if (consumed_) throw ContractError("backward: adjoint graph already consumed");
        if (!loss.valid() || loss.tape != this) throw ContractError("backward: loss not on this tape");
        Node& ln = nodes_.at(loss.id);
        if (ln.value.size() != 1) throw ContractError("backward: loss must be a scalar");
        consumed_ = true;
        grad(loss.id).assign(1, 1.0);
        for (int i = loss.id; i >= 0; --i) {
            Node& n = nodes_[std::size_t(i)];
            if (!n.needs_grad || n.grad.empty()) continue;
            if (n.pull) n.pull(*this);
            if (n.bound) {
                auto& pg = n.bound->grad;
                for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
            }
        }
    }

    bool consumed() const { return consumed_; }
    std::size_t size() const { return nodes_.size(); }

    // --- internals shared with the op implementations ---
    struct Node {
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad;
        bool needs_grad = false;
        Parameter* bound = nullptr;
        std::function<void(Tape&)> pull;
    };

    Var make(Shape s, std::vector<double> v, bool needs) {
        Node n;
        n.shape = std::move(s);
        n.value = std::move(v);
        n.needs_grad = needs;
        nodes_.push_back(std::move(n));
        return Var{this, int(nodes_.size()) - 1};
    }

    Node& node(int id) { return nodes_.at(std::size_t(id)); }
    const Node& node(int id) const { return nodes_.at(std::size_t(id)); }

    // Lazily-sized gradient buffer; absent buffers mean "no gradient flowed".
    std::vector<double>& grad(int id) {
        Node& n = nodes_.at(std::size_t(id));
        if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
        return n.grad;
    }
    bool needs(Var v) const { return nodes_.at(std::size_t(v.id)).needs_grad; }

    void set_pull(Var v, std::function<void(Tape&)> fn) { nodes_.at(std::size_t(v.id)).pull = std::move(fn); }

private:
    std::vector<Node> nodes_;
    bool consumed_ = false;
};

namespace opd {

inline Tape& same_tape(Var a, Var b) {
    if (a.tape != b.tape || a.tape == nullptr) throw ContractError("op: operands on different tapes");
    return *a.tape;
}

// Accumulate src into the grad buffer of node `id` if it wants gradients.
inline void add_grad(Tape& t, int id, const std::vector<double>& src) {
    if (!t.node(id).needs_grad) return;
    auto& g = t.grad(id);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += src[i];
}

} // namespace opd

// ---- elementwise ----

inline Var add(Var a, Var b) {
    Tape& t = opd::same_tape(a, b);
    require_same_shape(t.shape(a), t.shape(b), "add");
    const auto& av = t.data(a);
    const auto& bv = t.data(b);
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    Var o = t.make(t.shape(a), std::move(out), t.needs(a) || t.needs(b));
    if (t.needs(a) || t.needs(b)) {
        int oa = a.id, ob = b.id, oo = o.id;
        t.set_pull(o, [oa, ob, oo](Tape& tt) {
            const auto& g = tt.node(oo).grad;
            opd::add_grad(tt, oa, g);
            opd::add_grad(tt, ob, g);
        });
    }
    return o;
}

inline Var sub(Var a, Var b) {
    Tape& t = opd::same_tape(a, b);
    require_same_shape(t.shape(a), t.shape(b), "sub");
    const auto& av = t.data(a);
    const auto& bv = t.data(b);
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    Var o = t.make(t.shape(a), std::move(out), t.needs(a) || t.needs(b));
    if (t.needs(a) || t.needs(b)) {
        int oa = a.id, ob = b.id, oo = o.id;
        t.set_pull(o, [oa, ob, oo](Tape& tt) {
            const auto& g = tt.node(oo).grad;
            if (tt.node(oa).needs_grad) opd::add_grad(tt, oa, g);
            if (tt.node(ob).needs_grad) {
                auto& gb = tt.grad(ob);
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
            }
        });
    }
    return o;
}

inline Var mul(Var a, Var b) {
    Tape& t = opd::same_tape(a, b);
    require_same_shape(t.shape(a), t.shape(b), "mul");
    const auto& av = t.data(a);
    const auto& bv = t.data(b);
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    Var o = t.make(t.shape(a), std::move(out), t.needs(a) || t.needs(b));
    if (t.needs(a) || t.needs(b)) {
        int oa = a.id, ob = b.id, oo = o.id;
        t.set_pull(o, [oa, ob, oo](Tape& tt) {
            const auto& g = tt.node(oo).grad;
            const auto& av2 = tt.node(oa).value;
            const auto& bv2 = tt.node(ob).value;
            if (tt.node(oa).needs_grad) {
                auto& ga = tt.grad(oa);
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv2[i];
            }
            if (tt.node(ob).needs_grad) {
                auto& gb = tt.grad(ob);
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av2[i];
            }
        });
    }
    return o;
}

inline Var scale(Var a, double c) {
    Tape& t = *a.tape;
    const auto& av = t.data(a);
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
    Var o = t.make(t.shape(a), std::move(out), t.needs(a));
    if (t.needs(a)) {
        int oa = a.id, oo = o.id;
        t.set_pull(o, [oa, oo, c](Tape& tt) {
            const auto& g = tt.node(oo).grad;
            auto& ga = tt.grad(oa);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c * g[i];
        });
    }
    return o;
}

inline Var gelu(Var a) {
    Tape& t = *a.tape;
    const auto& av = t.data(a);
    std::vector<double> out(av.size());
    constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2.0;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * av[i] * (1.0 + std::erf(av[i] * inv_sqrt2));
    Var o = t.make(t.shape(a), std::move(out), t.needs(a));
    if (t.needs(a)) {
        int oa = a.id, oo = o.id;
        t.set_pull(o, [oa, oo](Tape& tt) {
            const auto& g = tt.node(oo).grad;
            const auto& x = tt.node(oa).value;
            auto& ga = tt.grad(oa);
            constexpr double is2 = std::numbers::sqrt2 / 2.0;
            const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
            for (std::size_t i = 0; i < ga.size(); ++i) {
                double cdf = 0.5 * (1.0 + std::erf(x[i] * is2));
                double pdf = inv_sqrt2pi * std::exp(-0.5 * x[i] * x[i]);
                ga[i] += g[i] * (cdf + x[i] * pdf);
            }
        });
    }
    return o;
}

inline Var detach(Var a) {
    Tape& t = *a.tape;
    return t.make(t.shape(a), std::vector<double>(t.data(a)), false);
}

// ---- reductions ----

inline Var sum(Var a) {
    Tape& t = *a.tape;
    const auto& av = t.data(a);
    double s = 0.0;
    for (double v : av) s += v;
    Var o = t.make(Shape{1}, {s}, t.needs(a));
    if (t.needs(a)) {
        int oa = a.id, oo = o.id;
        t.set_pull(o, [oa, oo](Tape& tt) {
            double g = tt.node(oo).grad[0];
            auto& ga = tt.grad(oa);
            for (auto& v : ga) v += g;
        });
    }
    return o;
}

inline Var mean(Var a) { return scale(sum(a), 1.0 / double(a.tape->data(a).size())); }

inline Var sumsq(Var a) {
    Tape& t = *a.tape;
    const auto& av = t.data(a);
    double s = 0.0;
    for (double v : av) s += v * v;
    Var o = t.make(Shape{1}, {s}, t.needs(a));
    if (t.needs(a)) {
        int oa = a.id, oo = o.id;
        t.set_pull(o, [oa, oo](Tape& tt) {
            double g = tt.node(oo).grad[0];
            const auto& x = tt.node(oa).value;
            auto& ga = tt.grad(oa);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * g * x[i];
        });
    }
    return o;
}

inline Var mse(Var a, Var b) {
    Tape& t = opd::same_tape(a, b);
    require_same_shape(t.shape(a), t.shape(b), "mse");
    const auto& av = t.data(a);
    const auto& bv = t.data(b);
    double s = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        double d = av[i] - bv[i];
        s += d * d;
    }
    double n = double(av.size());
    Var o = t.make(Shape{1}, {s / n}, t.needs(a) || t.needs(b));
    if (t.needs(a) || t.needs(b)) {
        int oa = a.id, ob = b.id, oo = o.id;
        t.set_pull(o, [oa, ob, oo, n](Tape& tt) {
            double g = tt.node(oo).grad[0] * 2.0 / n;
            const auto& x = tt.node(oa).value;
            const auto& y = tt.node(ob).value;
            if (tt.node(oa).needs_grad) {
                auto& ga = tt.grad(oa);
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * (x[i] - y[i]);
            }
            if (tt.node(ob).needs_grad) {
                auto& gb = tt.grad(ob);
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g * (x[i] - y[i]);
            }
        });
    }
    return o;
}

// ---- 2-D helpers ----

namespace opd {
inline void require_2d(const Shape& s, const char* what) {
    if (s.size() != 2) throw DimensionError(std::string(what) + ": expected a 2-D operand, got " + shape_str(s));
}
} // namespace opd

inline Var matmul_nn(Var A, Var B) {
    Tape& t = opd::same_tape(A, B);
    opd::require_2d(t.shape(A), "matmul_nn");
    opd::require_2d(t.shape(B), "matmul_nn");
    std::size_t n = t.shape(A)[0], k = t.shape(A)[1], k2 = t.shape(B)[0], m = t.shape(B)[1];
    if (k != k2) throw DimensionError("matmul_nn: inner dimensions disagree");
    const auto& a = t.data(A);
    const auto& b = t.data(B);
    std::vector<double> out(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            double av = a[i * k + p];
            for (std::size_t j = 0; j < m; ++j) out[i * m + j] += av * b[p * m + j];
        }
    Var o = t.make(Shape{n, m}, std::move(out), t.needs(A) || t.needs(B));
    if (t.needs(A) || t.needs(B)) {
        int ia = A.id, ib = B.id, io = o.id;
        t.set_pull(o, [ia, ib, io, n, k, m](Tape& tt) {
            const auto& g = tt.node(io).grad;
            const auto& a2 = tt.node(ia).value;
            const auto& b2 = tt.node(ib).value;
            if (tt.node(ia).needs_grad) {
                auto& ga = tt.grad(ia); // g . B^T
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < m; ++j) s += g[i * m + j] * b2[p * m + j];
                        ga[i * k + p] += s;
                    }
            }
            if (tt.node(ib).needs_grad) {
                auto& gb = tt.grad(ib); // A^T . g
                for (std::size_t p = 0; p < k; ++p)
                    for (std::size_t i = 0; i < n; ++i) {
                        double av = a2[i * k + p];
                        for (std::size_t j = 0; j < m; ++j) gb[p * m + j] += av * g[i * m + j];
                    }
            }
        });
    }
    return o;
}

// A[n,k] . B[m,k]^T -> [n,m]
inline Var matmul_nt(Var A, Var B) {
    Tape& t = opd::same_tape(A, B);
    opd::require_2d(t.shape(A), "matmul_nt");
    opd::require_2d(t.shape(B), "matmul_nt");
    std::size_t n = t.shape(A)[0], k = t.shape(A)[1], m = t.shape(B)[0];
    if (k != t.shape(B)[1]) throw DimensionError("matmul_nt: inner dimensions disagree");
    const auto& a = t.data(A);
    const auto& b = t.data(B);
    std::vector<double> out(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
            out[i * m + j] = s;
        }
    Var o = t.make(Shape{n, m}, std::move(out), t.needs(A) || t.needs(B));
    if (t.needs(A) || t.needs(B)) {
        int ia = A.id, ib = B.id, io = o.id;
        t.set_pull(o, [ia, ib, io, n, k, m](Tape& tt) {
            const auto& g = tt.node(io).grad;
            const auto& a2 = tt.node(ia).value;
            const auto& b2 = tt.node(ib).value;
            if (tt.node(ia).needs_grad) {
                auto& ga = tt.grad(ia); // g . B
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) {
                        double gv = g[i * m + j];
                        for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += gv * b2[j * k + p];
                    }
            }
            if (tt.node(ib).needs_grad) {
                auto& gb = tt.grad(ib); // g^T . A
                for (std::size_t j = 0; j < m; ++j)
                    for (std::size_t i = 0; i < n; ++i) {
                        double gv = g[i * m + j];
                        for (std::size_t p = 0; p < k; ++p) gb[j * k + p] += gv * a2[i * k + p];
                    }
            }
        });
    }
    return o;
}

// X[n,in] . W[out,in]^T + b[out], the dense layer building block.
inline Var linear(Var X, Var W, Var b) {
    Tape& t = opd::same_tape(X, W);
    opd::require_2d(t.shape(X), "linear");
    opd::require_2d(t.shape(W), "linear");
    std::size_t n = t.shape(X)[0], in = t.shape(X)[1], out_dim = t.shape(W)[0];
    if (in != t.shape(W)[1]) throw DimensionError("linear: input width does not match weight");
    if (t.shape(b) != Shape{out_dim}) throw DimensionError("linear: bias shape mismatch");
    const auto& x = t.data(X);
    const auto& w = t.data(W);
    const auto& bias = t.data(b);
    std::vector<double> out(n * out_dim);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t o = 0; o < out_dim; ++o) {
            double s = bias[o];
            const double* xr = &x[i * in];
            const double* wr = &w[o * in];
            for (std::size_t p = 0; p < in; ++p) s += xr[p] * wr[p];
            out[i * out_dim + o] = s;
        }
    bool needs = t.needs(X) || t.needs(W) || t.needs(b);
    Var o = t.make(Shape{n, out_dim}, std::move(out), needs);
    if (needs) {
        int ix = X.id, iw = W.id, ib = b.id, io = o.id;
        t.set_pull(o, [ix, iw, ib, io, n, in, out_dim](Tape& tt) {
            const auto& g = tt.node(io).grad;
            const auto& x2 = tt.node(ix).value;
            const auto& w2 = tt.node(iw).value;
            if (tt.node(ix).needs_grad) {
                auto& gx = tt.grad(ix);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t o2 = 0; o2 < out_dim; ++o2) {
                        double gv = g[i * out_dim + o2];
                        const double* wr = &w2[o2 * in];
                        double* gxr = &gx[i * in];
                        for (std::size_t p = 0; p < in; ++p) gxr[p] += gv * wr[p];
                    }
            }
            if (tt.node(iw).needs_grad) {
                auto& gw = tt.grad(iw);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t o2 = 0; o2 < out_dim; ++o2) {
                        double gv = g[i * out_dim + o2];
                        const double* xr = &x2[i * in];
                        double* gwr = &gw[o2 * in];
                        for (std::size_t p = 0; p < in; ++p) gwr[p] += gv * xr[p];
                    }
            }
            if (tt.node(ib).needs_grad) {
                auto& gb = tt.grad(ib);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t o2 = 0; o2 < out_dim; ++o2) gb[o2] += g[i * out_dim + o2];
            }
        });
    }
    return o;
}

inline Var softmax_rows(Var A) {
    Tape& t = *A.tape;
    opd::require_2d(t.shape(A), "softmax_rows");
    std::size_t n = t.shape(A)[0], m = t.shape(A)[1];
    const auto& a = t.data(A);
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = a[i * m];
        for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, a[i * m + j]);
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            out[i * m + j] = std::exp(a[i * m + j] - mx);
            s += out[i * m + j];
        }
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] /= s;
    }
    Var o = t.make(Shape{n, m}, std::move(out), t.needs(A));
    if (t.needs(A)) {
        int ia = A.id, io = o.id;
        t.set_pull(o, [ia, io, n, m](Tape& tt) {
            const auto& g = tt.node(io).grad;
            const auto& y = tt.node(io).value;
            auto& ga = tt.grad(ia);
            for (std::size_t i = 0; i < n; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < m; ++j) dot += g[i * m + j] * y[i * m + j];
                for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += y[i * m + j] * (g[i * m + j] - dot);
            }
        });
    }
    return o;
}

// ---- slicing / concatenation ----

inline Var slice_cols(Var A, std::size_t c0, std::size_t c1) {
    Tape& t = *A.tape;
    opd::require_2d(t.shape(A), "slice_cols");
    std::size_t n = t.shape(A)[0], m = t.shape(A)[1];
    if (c0 >= c1 || c1 > m) throw DimensionError("slice_cols: bad column range");
    std::size_t w = c1 - c0;
    const auto& a = t.data(A);
    std::vector<double> out(n * w);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < w; ++j) out[i * w + j] = a[i * m + c0 + j];
    Var o = t.make(Shape{n, w}, std::move(out), t.needs(A));
    if (t.needs(A)) {
        int ia = A.id, io = o.id;
        t.set_pull(o, [ia, io, n, m, c0, w](Tape& tt) {
            const auto& g = tt.node(io).grad;
            auto& ga = tt.grad(ia);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < w; ++j) ga[i * m + c0 + j] += g[i * w + j];
        });
    }
    return o;
}

inline Var slice_rows(Var A, std::size_t r0, std::size_t r1) {
    Tape& t = *A.tape;
    opd::require_2d(t.shape(A), "slice_rows");
    std::size_t n = t.shape(A)[0], m = t.shape(A)[1];
    if (r0 >= r1 || r1 > n) throw DimensionError("slice_rows: bad row range");
    std::size_t h = r1 - r0;
    const auto& a = t.data(A);
    std::vector<double> out(a.begin() + long(r0 * m), a.begin() + long(r1 * m));
    Var o = t.make(Shape{h, m}, std::move(out), t.needs(A));
    if (t.needs(A)) {
        int ia = A.id, io = o.id;
        t.set_pull(o, [ia, io, r0, m, h](Tape& tt) {
            const auto& g = tt.node(io).grad;
            auto& ga = tt.grad(ia);
            for (std::size_t i = 0; i < h * m; ++i) ga[r0 * m + i] += g[i];
        });
    }
    return o;
}

inline Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: empty list");
    Tape& t = *parts[0].tape;
    std::size_t n = t.shape(parts[0])[0];
    std::size_t total = 0;
    bool needs = false;
    for (Var p : parts) {
        opd::require_2d(t.shape(p), "concat_cols");
        if (t.shape(p)[0] != n) throw DimensionError("concat_cols: row counts differ");
        total += t.shape(p)[1];
        needs = needs || t.needs(p);
    }
    std::vector<double> out(n * total);
    std::size_t off = 0;
    for (Var p : parts) {
        std::size_t w = t.shape(p)[1];
        const auto& pv = t.data(p);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < w; ++j) out[i * total + off + j] = pv[i * w + j];
        off += w;
    }
    Var o = t.make(Shape{n, total}, std::move(out), needs);
    if (needs) {
        std::vector<int> ids;
        std::vector<std::size_t> widths;
        for (Var p : parts) {
            ids.push_back(p.id);
            widths.push_back(t.shape(p)[1]);
        }
        int io = o.id;
        t.set_pull(o, [ids, widths, io, n, total](Tape& tt) {
            const auto& g = tt.node(io).grad;
            std::size_t off2 = 0;
            for (std::size_t pi = 0; pi < ids.size(); ++pi) {
                std::size_t w = widths[pi];
                if (tt.node(ids[pi]).needs_grad) {
                    auto& gp = tt.grad(ids[pi]);
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < w; ++j) gp[i * w + j] += g[i * total + off2 + j];
                }
                off2 += w;
            }
        });
    }
    return o;
}

inline Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: empty list");
    Tape& t = *parts[0].tape;
    std::size_t m = t.shape(parts[0])[1];
    std::size_t total = 0;
    bool needs = false;
    for (Var p : parts) {
        opd::require_2d(t.shape(p), "concat_rows");
        if (t.shape(p)[1] != m) throw DimensionError("concat_rows: column counts differ");
        total += t.shape(p)[0];
        needs = needs || t.needs(p);
    }
    std::vector<double> out;
    out.reserve(total * m);
    for (Var p : parts) out.insert(out.end(), t.data(p).begin(), t.data(p).end());
    Var o = t.make(Shape{total, m}, std::move(out), needs);
    if (needs) {
        std::vector<int> ids;
        std::vector<std::size_t> heights;
        for (Var p : parts) {
            ids.push_back(p.id);
            heights.push_back(t.shape(p)[0]);
        }
        int io = o.id;
        t.set_pull(o, [ids, heights, io, m](Tape& tt) {
            const auto& g = tt.node(io).grad;
            std::size_t off2 = 0;
            for (std::size_t pi = 0; pi < ids.size(); ++pi) {
                std::size_t h = heights[pi];
                if (tt.node(ids[pi]).needs_grad) {
                    auto& gp = tt.grad(ids[pi]);
                    for (std::size_t i = 0; i < h * m; ++i) gp[i] += g[off2 + i];
                }
                off2 += h * m;
            }
        });
    }
    return o;
}

// ---- per-row and per-variate broadcasts (R = B*V rows) ----

inline Var row_mean(Var A) {
    Tape& t = *A.tape;
    opd::require_2d(t.shape(A), "row_mean");
    std::size_t n = t.shape(A)[0], m = t.shape(A)[1];
    const auto& a = t.data(A);
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += a[i * m + j];
        out[i] = s / double(m);
    }
    Var o = t.make(Shape{n}, std::move(out), t.needs(A));
    if (t.needs(A)) {
        int ia = A.id, io = o.id;
        t.set_pull(o, [ia, io, n, m](Tape& tt) {
            const auto& g = tt.node(io).grad;
            auto& ga = tt.grad(ia);
            for (std::size_t i = 0; i < n; ++i) {
                double gv = g[i] / double(m);
                for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += gv;
            }
        });
    }
    return o;
}

namespace opd {

enum class RowOp { Add, Sub, Mul, Div };

inline Var rowvec_op(Var A, Var v, RowOp kind, const char* what) {
    Tape& t = same_tape(A, v);
    require_2d(t.shape(A), what);
    std::size_t n = t.shape(A)[0], m = t.shape(A)[1];
    if (t.shape(v) != Shape{n}) throw DimensionError(std::string(what) + ": vector length must equal row count");
    const auto& a = t.data(A);
    const auto& vv = t.data(v);
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double x = a[i * m + j];
            switch (kind) {
                case RowOp::Add: out[i * m + j] = x + vv[i]; break;
                case RowOp::Sub: out[i * m + j] = x - vv[i]; break;
                case RowOp::Mul: out[i * m + j] = x * vv[i]; break;
                case RowOp::Div: out[i * m + j] = x / vv[i]; break;
            }
        }
    bool needs = t.needs(A) || t.needs(v);
    Var o = t.make(Shape{n, m}, std::move(out), needs);
    if (needs) {
        int ia = A.id, iv = v.id, io = o.id;
        t.set_pull(o, [ia, iv, io, n, m, kind](Tape& tt) {
            const auto& g = tt.node(io).grad;
            const auto& a2 = tt.node(ia).value;
            const auto& v2 = tt.node(iv).value;
            if (tt.node(ia).needs_grad) {
                auto& ga = tt.grad(ia);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) {
                        double gv = g[i * m + j];
                        switch (kind) {
                            case RowOp::Add:
                            case RowOp::Sub: ga[i * m + j] += gv; break;
                            case RowOp::Mul: ga[i * m + j] += gv * v2[i]; break;
                            case RowOp::Div: ga[i * m + j] += gv / v2[i]; break;
                        }
                    }
            }
            if (tt.node(iv).needs_grad) {
                auto& gv2 = tt.grad(iv);
                for (std::size_t i = 0; i < n; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < m; ++j) {
                        double gv = g[i * m + j];
                        switch (kind) {
                            case RowOp::Add: s += gv; break;
                            case RowOp::Sub: s -= gv; break;
                            case RowOp::Mul: s += gv * a2[i * m + j]; break;
                            case RowOp::Div: s -= gv * a2[i * m + j] / (v2[i] * v2[i]); break;
                        }
                    }
                    gv2[i] += s;
                }
            }
        });
    }
    return o;
}

} // namespace opd

inline Var add_rowvec(Var A, Var v) { return opd::rowvec_op(A, v, opd::RowOp::Add, "add_rowvec"); }
inline Var sub_rowvec(Var A, Var v) { return opd::rowvec_op(A, v, opd::RowOp::Sub, "sub_rowvec"); }
inline Var mul_rowvec(Var A, Var v) { return opd::rowvec_op(A, v, opd::RowOp::Mul, "mul_rowvec"); }
inline Var div_rowvec(Var A, Var v) { return opd::rowvec_op(A, v, opd::RowOp::Div, "div_rowvec"); }

// sigma = max(sqrt(v), floor); the floor branch blocks the gradient.
inline Var std_floor(Var v, double floor_val) {
    Tape& t = *v.tape;
    const auto& vv = t.data(v);
    std::vector<double> out(vv.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(std::sqrt(std::max(vv[i], 0.0)), floor_val);
    Var o = t.make(t.shape(v), std::move(out), t.needs(v));
    if (t.needs(v)) {
        int iv = v.id, io = o.id;
        t.set_pull(o, [iv, io, floor_val](Tape& tt) {
            const auto& g = tt.node(io).grad;
            const auto& s = tt.node(io).value;
            auto& gv = tt.grad(iv);
            for (std::size_t i = 0; i < gv.size(); ++i)
                if (s[i] > floor_val) gv[i] += g[i] / (2.0 * s[i]);
        });
    }
    return o;
}

// Row r of A is scaled/shifted by the per-variate coefficient c[r % V].
namespace opd {

inline Var varvec_op(Var A, Var c, std::size_t V, bool multiply, const char* what) {
    Tape& t = same_tape(A, c);
    require_2d(t.shape(A), what);
    std::size_t n = t.shape(A)[0], m = t.shape(A)[1];
    if (t.shape(c) != Shape{V}) throw DimensionError(std::string(what) + ": coefficient vector must have length V");
    if (n % V != 0) throw DimensionError(std::string(what) + ": row count not a multiple of V");
    const auto& a = t.data(A);
    const auto& cv = t.data(c);
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        double coef = cv[i % V];
        for (std::size_t j = 0; j < m; ++j)
            out[i * m + j] = multiply ? a[i * m + j] * coef : a[i * m + j] + coef;
    }
    bool needs = t.needs(A) || t.needs(c);
    Var o = t.make(Shape{n, m}, std::move(out), needs);
    if (needs) {
        int ia = A.id, ic = c.id, io = o.id;
        t.set_pull(o, [ia, ic, io, n, m, V, multiply](Tape& tt) {
            const auto& g = tt.node(io).grad;
            const auto& a2 = tt.node(ia).value;
            const auto& c2 = tt.node(ic).value;
            if (tt.node(ia).needs_grad) {
                auto& ga = tt.grad(ia);
                for (std::size_t i = 0; i < n; ++i) {
                    double coef = multiply ? c2[i % V] : 1.0;
                    for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += g[i * m + j] * coef;
                }
            }
            if (tt.node(ic).needs_grad) {
                auto& gc = tt.grad(ic);
                for (std::size_t i = 0; i < n; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < m; ++j)
                        s += multiply ? g[i * m + j] * a2[i * m + j] : g[i * m + j];
                    gc[i % V] += s;
                }
            }
        });
    }
    return o;
}

} // namespace opd

inline Var scale_per_variate(Var A, Var gamma, std::size_t V) {
    return opd::varvec_op(A, gamma, V, true, "scale_per_variate");
}
inline Var shift_per_variate(Var A, Var beta, std::size_t V) {
    return opd::varvec_op(A, beta, V, false, "shift_per_variate");
}

// ---- complex and spectral ops ----

// Rows of X hold interleaved complex vectors of length Kin; W is a complex
// [Kout x Kin] parameter node (trailing dim 2), b complex [Kout].
// y[r,j] = sum_k W[j,k] * x[r,k] + b[j].
inline Var complex_matvec_rows(Var X, Var W, Var b) {
    Tape& t = opd::same_tape(X, W);
    opd::require_2d(t.shape(X), "complex_matvec_rows");
    const Shape& ws = t.shape(W);
    if (ws.size() != 3 || ws[2] != 2) throw DimensionError("complex_matvec_rows: W must be [Kout x Kin x 2]");
    std::size_t rows = t.shape(X)[0], kin2 = t.shape(X)[1], kout = ws[0], kin = ws[1];
    if (kin2 != 2 * kin) throw DimensionError("complex_matvec_rows: input width must be 2*Kin");
    if (t.shape(b) != Shape{kout, 2}) throw DimensionError("complex_matvec_rows: bias must be [Kout x 2]");
    const auto& x = t.data(X);
    const auto& w = t.data(W);
    const auto& bias = t.data(b);
    std::vector<double> out(rows * 2 * kout);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = &x[r * 2 * kin];
        double* yr = &out[r * 2 * kout];
        for (std::size_t j = 0; j < kout; ++j) {
            double re = bias[2 * j], im = bias[2 * j + 1];
            const double* wr = &w[j * 2 * kin];
            for (std::size_t k = 0; k < kin; ++k) {
                double wre = wr[2 * k], wim = wr[2 * k + 1];
                double xre = xr[2 * k], xim = xr[2 * k + 1];
                re += wre * xre - wim * xim;
                im += wre * xim + wim * xre;
            }
            yr[2 * j] = re;
            yr[2 * j + 1] = im;
        }
    }
    bool needs = t.needs(X) || t.needs(W) || t.needs(b);
    Var o = t.make(Shape{rows, 2 * kout}, std::move(out), needs);
    if (needs) {
        int ix = X.id, iw = W.id, ibi = b.id, io = o.id;
        t.set_pull(o, [ix, iw, ibi, io, rows, kin, kout](Tape& tt) {
            const auto& g = tt.node(io).grad;
            const auto& x2 = tt.node(ix).value;
            const auto& w2 = tt.node(iw).value;
            // split-real adjoints: g_x += conj(W)^T G, g_W += G conj(x), g_b += sum G
            if (tt.node(ix).needs_grad) {
                auto& gx = tt.grad(ix);
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* gr = &g[r * 2 * kout];
                    double* gxr = &gx[r * 2 * kin];
                    for (std::size_t j = 0; j < kout; ++j) {
                        double gre = gr[2 * j], gim = gr[2 * j + 1];
                        const double* wr = &w2[j * 2 * kin];
                        for (std::size_t k = 0; k < kin; ++k) {
                            double wre = wr[2 * k], wim = wr[2 * k + 1];
                            gxr[2 * k] += gre * wre + gim * wim;
                            gxr[2 * k + 1] += -gre * wim + gim * wre;
                        }
                    }
                }
            }
            if (tt.node(iw).needs_grad) {
                auto& gw = tt.grad(iw);
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* gr = &g[r * 2 * kout];
                    const double* xr = &x2[r * 2 * kin];
                    for (std::size_t j = 0; j < kout; ++j) {
                        double gre = gr[2 * j], gim = gr[2 * j + 1];
                        double* gwr = &gw[j * 2 * kin];
                        for (std::size_t k = 0; k < kin; ++k) {
                            double xre = xr[2 * k], xim = xr[2 * k + 1];
                            gwr[2 * k] += gre * xre + gim * xim;
                            gwr[2 * k + 1] += -gre * xim + gim * xre;
                        }
                    }
                }
            }
            if (tt.node(ibi).needs_grad) {
                auto& gb = tt.grad(ibi);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < 2 * kout; ++j) gb[j] += g[r * 2 * kout + j];
            }
        });
    }
    return o;
}

// Per-row real FFT: [R x L] -> [R x (L+2)] interleaved bins 0..L/2.
inline Var rfft_rows(Var X) {
    Tape& t = *X.tape;
    opd::require_2d(t.shape(X), "rfft_rows");
    std::size_t rows = t.shape(X)[0], L = t.shape(X)[1];
    if (L < 4 || L % 2 != 0) throw ContractError("rfft_rows: row length must be even and >= 4");
    const auto& x = t.data(X);
    std::size_t K = L / 2 + 1;
    std::vector<double> out(rows * 2 * K);
    for (std::size_t r = 0; r < rows; ++r) {
        RealArray row(Shape{L}, std::vector<double>(x.begin() + long(r * L), x.begin() + long((r + 1) * L)));
        ComplexArray Xr = rfft(row);
        for (std::size_t k = 0; k < K; ++k) {
            out[r * 2 * K + 2 * k] = Xr.re(k);
            out[r * 2 * K + 2 * k + 1] = Xr.im(k);
        }
    }
    Var o = t.make(Shape{rows, 2 * K}, std::move(out), t.needs(X));
    if (t.needs(X)) {
        int ix = X.id, io = o.id;
        t.set_pull(o, [ix, io, rows, L, K](Tape& tt) {
            const auto& g = tt.node(io).grad;
            auto& gx = tt.grad(ix);
            // adjoint of the forward DFT: L * irfft of the half-weighted grad
            for (std::size_t r = 0; r < rows; ++r) {
                ComplexArray c(Shape{K});
                c.set(0, {g[r * 2 * K], 0.0});
                c.set(K - 1, {g[r * 2 * K + 2 * (K - 1)], 0.0});
                for (std::size_t k = 1; k + 1 < K; ++k)
                    c.set(k, {0.5 * g[r * 2 * K + 2 * k], 0.5 * g[r * 2 * K + 2 * k + 1]});
                RealArray gr = irfft(c, L);
                for (std::size_t n = 0; n < L; ++n) gx[r * L + n] += double(L) * gr[n];
            }
        });
    }
    return o;
}

// Per-row inverse real FFT: [R x (L+2)] -> [R x L]. The imaginary parts of
// the DC and Nyquist bins are projected to zero (a linear map), so learned
// spectra always invert to real signals.
inline Var irfft_rows(Var Xf, std::size_t L) {
    Tape& t = *Xf.tape;
    opd::require_2d(t.shape(Xf), "irfft_rows");
    std::size_t rows = t.shape(Xf)[0], width = t.shape(Xf)[1];
    if (L < 4 || L % 2 != 0) throw ContractError("irfft_rows: length must be even and >= 4");
    std::size_t K = L / 2 + 1;
    if (width != 2 * K) throw DimensionError("irfft_rows: expected width 2*(L/2+1)");
    const auto& xf = t.data(Xf);
    std::vector<double> out(rows * L);
    for (std::size_t r = 0; r < rows; ++r) {
        ComplexArray c(Shape{K});
        for (std::size_t k = 0; k < K; ++k) c.set(k, {xf[r * 2 * K + 2 * k], xf[r * 2 * K + 2 * k + 1]});
        c.set(0, {c.re(0), 0.0});
        c.set(K - 1, {c.re(K - 1), 0.0});
        RealArray row = irfft(c, L);
        for (std::size_t n = 0; n < L; ++n) out[r * L + n] = row[n];
    }
    Var o = t.make(Shape{rows, L}, std::move(out), t.needs(Xf));
    if (t.needs(Xf)) {
        int ix = Xf.id, io = o.id;
        t.set_pull(o, [ix, io, rows, L, K](Tape& tt) {
            const auto& g = tt.node(io).grad;
            auto& gx = tt.grad(ix);
            for (std::size_t r = 0; r < rows; ++r) {
                RealArray grow(Shape{L},
                               std::vector<double>(g.begin() + long(r * L), g.begin() + long((r + 1) * L)));
                ComplexArray G = rfft(grow);
                double two_over = 2.0 / double(L), one_over = 1.0 / double(L);
                gx[r * 2 * K] += one_over * G.re(0);
                gx[r * 2 * K + 2 * (K - 1)] += one_over * G.re(K - 1);
                for (std::size_t k = 1; k + 1 < K; ++k) {
                    gx[r * 2 * K + 2 * k] += two_over * G.re(k);
                    gx[r * 2 * K + 2 * k + 1] += two_over * G.im(k);
                }
            }
        });
    }
    return o;
}

// ---- verification ----

// Runs f (which must perform its own forward+backward into p.grad), then
// compares the analytic gradient against central finite differences.
// Returns the max relative error over coordinates.
inline double finite_diff_check(const std::function<double()>& f, Parameter& p, double step) {
    if (step <= 0.0) throw ContractError("finite_diff_check: step must be positive");
    p.zero_grad();
    double base = f();
    if (!std::isfinite(base)) throw NumericError("finite_diff_check: non-finite function value");
    std::vector<double> analytic = p.grad;
    double max_rel = 0.0;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
        double saved = p.value[i];
        p.value[i] = saved + step;
        double fp = f();
        p.value[i] = saved - step;
        double fm = f();
        p.value[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("finite_diff_check: non-finite function value during perturbation");
        double fd = (fp - fm) / (2.0 * step);
        double rel = std::abs(analytic[i] - fd) / std::max({std::abs(analytic[i]), std::abs(fd), 1e-8});
        max_rel = std::max(max_rel, rel);
    }
    p.zero_grad();
    return max_rel;
}

} // namespace freqflow::ad
