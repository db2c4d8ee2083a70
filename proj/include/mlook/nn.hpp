#ifndef MLOOK_NN_HPP
#define MLOOK_NN_HPP

// Minimal reverse-mode automatic differentiation over dense tensors.
// Scalar type is a template parameter: float for training, double for the
// finite-difference gradient-check mode.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace mlook::nn {

template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) {
        data.assign(count(shape), fill);
    }
    static size_t count(const std::vector<int>& s) {
        size_t n = 1;
        for (int d : s) {
            if (d < 0) throw std::invalid_argument("negative dimension");
            n *= static_cast<size_t>(d);
        }
        return n;
    }
    size_t size() const { return data.size(); }
    int rows() const { return shape.empty() ? 1 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    T& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
    const T& at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }
};

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward_fn;

    void ensure_grad() {
        if (grad.data.size() != value.data.size()) grad = Tensor<T>(value.shape);
    }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> constant(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    return n;
}

template <typename T>
Var<T> parameter(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = true;
    return n;
}

namespace detail {

template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    n->requires_grad = rg;
    n->parents = std::move(parents);
    return n;
}

template <typename T>
void check_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
    if (a->value.shape != b->value.shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace detail

// Runs reverse-mode accumulation from `root`, which must be scalar unless an
// upstream gradient is supplied.
template <typename T>
void backward(const Var<T>& root, const Tensor<T>* upstream = nullptr) {
    // topological order via DFS
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::function<void(Node<T>*)> visit = [&](Node<T>* n) {
        if (!n->requires_grad || seen.count(n)) return;
        seen.insert(n);
        for (auto& p : n->parents) visit(p.get());
        order.push_back(n);
    };
    visit(root.get());
    for (auto* n : order) n->ensure_grad();

    root->ensure_grad();
    if (upstream) {
        if (upstream->data.size() != root->value.data.size())
            throw std::invalid_argument("backward: upstream shape mismatch");
        root->grad = *upstream;
    } else {
        if (root->value.size() != 1)
            throw std::invalid_argument("backward: root must be scalar");
        root->grad.data[0] = T(1);
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn();
}

template <typename T>
void zero_grad(const Var<T>& v) {
    v->ensure_grad();
    std::fill(v->grad.data.begin(), v->grad.data.end(), T(0));
}

// ---- elementwise ----------------------------------------------------------

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    detail::check_same_shape(a, b, "add");
    Tensor<T> out = a->value;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] += b->value.data[i];
    auto n = detail::make_op(std::move(out), {a, b});
    n->backward_fn = [n_raw = n.get(), a, b] {
        for (size_t i = 0; i < n_raw->grad.size(); ++i) {
            if (a->requires_grad) a->grad.data[i] += n_raw->grad.data[i];
            if (b->requires_grad) b->grad.data[i] += n_raw->grad.data[i];
        }
    };
    return n;
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
    detail::check_same_shape(a, b, "sub");
    Tensor<T> out = a->value;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] -= b->value.data[i];
    auto n = detail::make_op(std::move(out), {a, b});
    n->backward_fn = [n_raw = n.get(), a, b] {
        for (size_t i = 0; i < n_raw->grad.size(); ++i) {
            if (a->requires_grad) a->grad.data[i] += n_raw->grad.data[i];
            if (b->requires_grad) b->grad.data[i] -= n_raw->grad.data[i];
        }
    };
    return n;
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    detail::check_same_shape(a, b, "mul");
    Tensor<T> out = a->value;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] *= b->value.data[i];
    auto n = detail::make_op(std::move(out), {a, b});
    n->backward_fn = [n_raw = n.get(), a, b] {
        for (size_t i = 0; i < n_raw->grad.size(); ++i) {
            if (a->requires_grad) a->grad.data[i] += n_raw->grad.data[i] * b->value.data[i];
            if (b->requires_grad) b->grad.data[i] += n_raw->grad.data[i] * a->value.data[i];
        }
    };
    return n;
}

template <typename T>
Var<T> scale(Var<T> a, T c) {
    Tensor<T> out = a->value;
    for (auto& v : out.data) v *= c;
    auto n = detail::make_op(std::move(out), {a});
    n->backward_fn = [n_raw = n.get(), a, c] {
        if (!a->requires_grad) return;
        for (size_t i = 0; i < n_raw->grad.size(); ++i)
            a->grad.data[i] += c * n_raw->grad.data[i];
    };
    return n;
}

template <typename T>
Var<T> add_scalar(Var<T> a, T c) {
    Tensor<T> out = a->value;
    for (auto& v : out.data) v += c;
    auto n = detail::make_op(std::move(out), {a});
    n->backward_fn = [n_raw = n.get(), a] {
        if (!a->requires_grad) return;
        for (size_t i = 0; i < n_raw->grad.size(); ++i) a->grad.data[i] += n_raw->grad.data[i];
    };
    return n;
}

template <typename T, typename Fwd, typename Deriv>
Var<T> unary_op(Var<T> a, Fwd fwd, Deriv deriv) {
    Tensor<T> out = a->value;
    for (auto& v : out.data) v = fwd(v);
    auto n = detail::make_op(std::move(out), {a});
    n->backward_fn = [n_raw = n.get(), a, deriv] {
        if (!a->requires_grad) return;
        for (size_t i = 0; i < n_raw->grad.size(); ++i)
            a->grad.data[i] +=
                n_raw->grad.data[i] * deriv(a->value.data[i], n_raw->value.data[i]);
    };
    return n;
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
    return unary_op(
        a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
        [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> tanh_op(Var<T> a) {
    return unary_op(
        a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> relu(Var<T> a) {
    return unary_op(
        a, [](T x) { return x > T(0) ? x : T(0); },
        [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> log_op(Var<T> a) {
    return unary_op(
        a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Var<T> softplus(Var<T> a) {
    return unary_op(
        a,
        [](T x) { return x > T(30) ? x : std::log1p(std::exp(x)); },
        [](T x, T) { return T(1) / (T(1) + std::exp(-x)); });
}

// Hard clamp; gradient is zero outside [lo, hi].
template <typename T>
Var<T> clamp(Var<T> a, T lo, T hi) {
    return unary_op(
        a, [lo, hi](T x) { return std::clamp(x, lo, hi); },
        [lo, hi](T x, T) { return (x >= lo && x <= hi) ? T(1) : T(0); });
}

// PReLU with a single learnable slope.
template <typename T>
Var<T> prelu(Var<T> a, Var<T> alpha) {
    if (alpha->value.size() != 1) throw std::invalid_argument("prelu: alpha must be scalar");
    const T al = alpha->value.data[0];
    Tensor<T> out = a->value;
    for (auto& v : out.data) v = v > T(0) ? v : al * v;
    auto n = detail::make_op(std::move(out), {a, alpha});
    n->backward_fn = [n_raw = n.get(), a, alpha, al] {
        for (size_t i = 0; i < n_raw->grad.size(); ++i) {
            const T x = a->value.data[i], g = n_raw->grad.data[i];
            if (a->requires_grad) a->grad.data[i] += g * (x > T(0) ? T(1) : al);
            if (alpha->requires_grad && x <= T(0)) alpha->grad.data[0] += g * x;
        }
    };
    return n;
}

// ---- shape & linear algebra -----------------------------------------------

template <typename T>
Var<T> reshape(Var<T> a, std::vector<int> shape) {
    if (Tensor<T>::count(shape) != a->value.size())
        throw std::invalid_argument("reshape: element count mismatch");
    Tensor<T> out;
    out.shape = std::move(shape);
    out.data = a->value.data;
    auto n = detail::make_op(std::move(out), {a});
    n->backward_fn = [n_raw = n.get(), a] {
        if (!a->requires_grad) return;
        for (size_t i = 0; i < n_raw->grad.size(); ++i) a->grad.data[i] += n_raw->grad.data[i];
    };
    return n;
}

template <typename T>
Var<T> transpose(Var<T> a) {
    const int R = a->value.rows(), C = a->value.cols();
    Tensor<T> out({C, R});
    for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) out.at(c, r) = a->value.at(r, c);
    auto n = detail::make_op(std::move(out), {a});
    n->backward_fn = [n_raw = n.get(), a, R, C] {
        if (!a->requires_grad) return;
        for (int r = 0; r < R; ++r)
            for (int c = 0; c < C; ++c) a->grad.at(r, c) += n_raw->grad.at(c, r);
    };
    return n;
}

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
    const int M = a->value.rows(), K = a->value.cols(), N = b->value.cols();
    if (b->value.rows() != K) throw std::invalid_argument("matmul: inner dim mismatch");
    Tensor<T> out({M, N});
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < K; ++k) {
            const T av = a->value.at(m, k);
            for (int ncol = 0; ncol < N; ++ncol) out.at(m, ncol) += av * b->value.at(k, ncol);
        }
    auto n = detail::make_op(std::move(out), {a, b});
    n->backward_fn = [n_raw = n.get(), a, b, M, K, N] {
        if (a->requires_grad)
            for (int m = 0; m < M; ++m)
                for (int ncol = 0; ncol < N; ++ncol) {
                    const T g = n_raw->grad.at(m, ncol);
                    for (int k = 0; k < K; ++k) a->grad.at(m, k) += g * b->value.at(k, ncol);
                }
        if (b->requires_grad)
            for (int m = 0; m < M; ++m)
                for (int k = 0; k < K; ++k) {
                    const T av = a->value.at(m, k);
                    for (int ncol = 0; ncol < N; ++ncol)
                        b->grad.at(k, ncol) += av * n_raw->grad.at(m, ncol);
                }
    };
    return n;
}

// X[T x D] + row vector b[D]
template <typename T>
Var<T> add_rowvec(Var<T> x, Var<T> b) {
    const int R = x->value.rows(), C = x->value.cols();
    if (static_cast<int>(b->value.size()) != C)
        throw std::invalid_argument("add_rowvec: width mismatch");
    Tensor<T> out = x->value;
    for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) out.at(r, c) += b->value.data[c];
    auto n = detail::make_op(std::move(out), {x, b});
    n->backward_fn = [n_raw = n.get(), x, b, R, C] {
        for (int r = 0; r < R; ++r)
            for (int c = 0; c < C; ++c) {
                const T g = n_raw->grad.at(r, c);
                if (x->requires_grad) x->grad.at(r, c) += g;
                if (b->requires_grad) b->grad.data[c] += g;
            }
    };
    return n;
}

// X[T x D] scaled per row by s[T]
template <typename T>
Var<T> rowwise_scale(Var<T> x, Var<T> s) {
    const int R = x->value.rows(), C = x->value.cols();
    if (static_cast<int>(s->value.size()) != R)
        throw std::invalid_argument("rowwise_scale: length mismatch");
    Tensor<T> out = x->value;
    for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) out.at(r, c) *= s->value.data[r];
    auto n = detail::make_op(std::move(out), {x, s});
    n->backward_fn = [n_raw = n.get(), x, s, R, C] {
        for (int r = 0; r < R; ++r) {
            const T sv = s->value.data[r];
            for (int c = 0; c < C; ++c) {
                const T g = n_raw->grad.at(r, c);
                if (x->requires_grad) x->grad.at(r, c) += g * sv;
                if (s->requires_grad) s->grad.data[r] += g * x->value.at(r, c);
            }
        }
    };
    return n;
}

template <typename T>
Var<T> sum_all(Var<T> a) {
    Tensor<T> out({1});
    out.data[0] = std::accumulate(a->value.data.begin(), a->value.data.end(), T(0));
    auto n = detail::make_op(std::move(out), {a});
    n->backward_fn = [n_raw = n.get(), a] {
        if (!a->requires_grad) return;
        for (auto& g : a->grad.data) g += n_raw->grad.data[0];
    };
    return n;
}

template <typename T>
Var<T> mean_all(Var<T> a) {
    return scale(sum_all(a), T(1) / static_cast<T>(a->value.size()));
}

template <typename T>
Var<T> slice_rows(Var<T> a, int r0, int r1) {
    const int R = a->value.rows(), C = a->value.cols();
    if (r0 < 0 || r1 > R || r0 >= r1) throw std::invalid_argument("slice_rows: bad range");
    Tensor<T> out({r1 - r0, C});
    for (int r = r0; r < r1; ++r)
        for (int c = 0; c < C; ++c) out.at(r - r0, c) = a->value.at(r, c);
    auto n = detail::make_op(std::move(out), {a});
    n->backward_fn = [n_raw = n.get(), a, r0, r1, C] {
        if (!a->requires_grad) return;
        for (int r = r0; r < r1; ++r)
            for (int c = 0; c < C; ++c) a->grad.at(r, c) += n_raw->grad.at(r - r0, c);
    };
    return n;
}

template <typename T>
Var<T> slice_cols(Var<T> a, int c0, int c1) {
    const int R = a->value.rows(), C = a->value.cols();
    if (c0 < 0 || c1 > C || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
    Tensor<T> out({R, c1 - c0});
    for (int r = 0; r < R; ++r)
        for (int c = c0; c < c1; ++c) out.at(r, c - c0) = a->value.at(r, c);
    auto n = detail::make_op(std::move(out), {a});
    n->backward_fn = [n_raw = n.get(), a, c0, c1, R] {
        if (!a->requires_grad) return;
        for (int r = 0; r < R; ++r)
            for (int c = c0; c < c1; ++c) a->grad.at(r, c) += n_raw->grad.at(r, c - c0);
    };
    return n;
}

template <typename T>
Var<T> concat_cols(std::vector<Var<T>> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    const int R = parts[0]->value.rows();
    int C = 0;
    for (const auto& p : parts) {
        if (p->value.rows() != R) throw std::invalid_argument("concat_cols: row mismatch");
        C += p->value.cols();
    }
    Tensor<T> out({R, C});
    int off = 0;
    for (const auto& p : parts) {
        const int pc = p->value.cols();
        for (int r = 0; r < R; ++r)
            for (int c = 0; c < pc; ++c) out.at(r, off + c) = p->value.at(r, c);
        off += pc;
    }
    auto n = detail::make_op(std::move(out), {parts});
    n->backward_fn = [n_raw = n.get(), parts, R] {
        int off = 0;
        for (const auto& p : parts) {
            const int pc = p->value.cols();
            if (p->requires_grad)
                for (int r = 0; r < R; ++r)
                    for (int c = 0; c < pc; ++c) p->grad.at(r, c) += n_raw->grad.at(r, off + c);
            off += pc;
        }
    };
    return n;
}

template <typename T>
Var<T> concat_rows(std::vector<Var<T>> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    const int C = parts[0]->value.cols();
    int R = 0;
    for (const auto& p : parts) {
        if (p->value.cols() != C) throw std::invalid_argument("concat_rows: col mismatch");
        R += p->value.rows();
    }
    Tensor<T> out({R, C});
    int off = 0;
    for (const auto& p : parts) {
        for (int r = 0; r < p->value.rows(); ++r)
            for (int c = 0; c < C; ++c) out.at(off + r, c) = p->value.at(r, c);
        off += p->value.rows();
    }
    auto n = detail::make_op(std::move(out), {parts});
    n->backward_fn = [n_raw = n.get(), parts, C] {
        int off = 0;
        for (const auto& p : parts) {
            if (p->requires_grad)
                for (int r = 0; r < p->value.rows(); ++r)
                    for (int c = 0; c < C; ++c) p->grad.at(r, c) += n_raw->grad.at(off + r, c);
            off += p->value.rows();
        }
    };
    return n;
}

// Row shift with edge replication: out[t] = in[clamp(t + k)].
template <typename T>
Var<T> shift_rows(Var<T> a, int k) {
    const int R = a->value.rows(), C = a->value.cols();
    auto cl = [R](int t) { return std::clamp(t, 0, R - 1); };
    Tensor<T> out({R, C});
    for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) out.at(r, c) = a->value.at(cl(r + k), c);
    auto n = detail::make_op(std::move(out), {a});
    n->backward_fn = [n_raw = n.get(), a, R, C, cl, k] {
        if (!a->requires_grad) return;
        for (int r = 0; r < R; ++r)
            for (int c = 0; c < C; ++c) a->grad.at(cl(r + k), c) += n_raw->grad.at(r, c);
    };
    return n;
}

template <typename T>
Var<T> softmax_rows(Var<T> a) {
    const int R = a->value.rows(), C = a->value.cols();
    Tensor<T> out({R, C});
    for (int r = 0; r < R; ++r) {
        T mx = a->value.at(r, 0);
        for (int c = 1; c < C; ++c) mx = std::max(mx, a->value.at(r, c));
        T z = T(0);
        for (int c = 0; c < C; ++c) z += std::exp(a->value.at(r, c) - mx);
        for (int c = 0; c < C; ++c) out.at(r, c) = std::exp(a->value.at(r, c) - mx) / z;
    }
    auto n = detail::make_op(std::move(out), {a});
    n->backward_fn = [n_raw = n.get(), a, R, C] {
        if (!a->requires_grad) return;
        for (int r = 0; r < R; ++r) {
            T dotp = T(0);
            for (int c = 0; c < C; ++c) dotp += n_raw->grad.at(r, c) * n_raw->value.at(r, c);
            for (int c = 0; c < C; ++c)
                a->grad.at(r, c) += n_raw->value.at(r, c) * (n_raw->grad.at(r, c) - dotp);
        }
    };
    return n;
}

// Maximum element of a vector; the gradient flows to the first argmax.
template <typename T>
Var<T> max_elem(Var<T> a) {
    size_t arg = 0;
    for (size_t i = 1; i < a->value.size(); ++i)
        if (a->value.data[i] > a->value.data[arg]) arg = i;
    Tensor<T> out({1});
    out.data[0] = a->value.data[arg];
    auto n = detail::make_op(std::move(out), {a});
    n->backward_fn = [n_raw = n.get(), a, arg] {
        if (a->requires_grad) a->grad.data[arg] += n_raw->grad.data[0];
    };
    return n;
}

// 1-D convolution with same padding: x[Cin x T], w[Cout x Cin x K], b[Cout].
template <typename T>
Var<T> conv1d(Var<T> x, Var<T> w, Var<T> b, int dilation = 1) {
    if (w->value.shape.size() != 3) throw std::invalid_argument("conv1d: weight must be 3-D");
    const int Cout = w->value.shape[0], Cin = w->value.shape[1], K = w->value.shape[2];
    if (x->value.rows() != Cin) throw std::invalid_argument("conv1d: input channel mismatch");
    if (static_cast<int>(b->value.size()) != Cout)
        throw std::invalid_argument("conv1d: bias size mismatch");
    const int Tlen = x->value.cols();
    const int half = (K - 1) / 2;

    Tensor<T> out({Cout, Tlen});
    for (int co = 0; co < Cout; ++co)
        for (int t = 0; t < Tlen; ++t) {
            T acc = b->value.data[co];
            for (int ci = 0; ci < Cin; ++ci) {
                const T* xr = &x->value.data[static_cast<size_t>(ci) * Tlen];
                const T* wr = &w->value.data[(static_cast<size_t>(co) * Cin + ci) * K];
                for (int k = 0; k < K; ++k) {
                    const int ti = t + (k - half) * dilation;
                    if (ti >= 0 && ti < Tlen) acc += wr[k] * xr[ti];
                }
            }
            out.at(co, t) = acc;
        }
    auto n = detail::make_op(std::move(out), {x, w, b});
    n->backward_fn = [n_raw = n.get(), x, w, b, Cout, Cin, K, Tlen, half, dilation] {
        for (int co = 0; co < Cout; ++co)
            for (int t = 0; t < Tlen; ++t) {
                const T g = n_raw->grad.at(co, t);
                if (g == T(0)) continue;
                if (b->requires_grad) b->grad.data[co] += g;
                for (int ci = 0; ci < Cin; ++ci) {
                    const size_t xoff = static_cast<size_t>(ci) * Tlen;
                    const size_t woff = (static_cast<size_t>(co) * Cin + ci) * K;
                    for (int k = 0; k < K; ++k) {
                        const int ti = t + (k - half) * dilation;
                        if (ti < 0 || ti >= Tlen) continue;
                        if (w->requires_grad)
                            w->grad.data[woff + k] += g * x->value.data[xoff + ti];
                        if (x->requires_grad)
                            x->grad.data[xoff + ti] += g * w->value.data[woff + k];
                    }
                }
            }
    };
    return n;
}

// Global layer normalization over all elements of x[C x T], with per-channel
// gain and bias.
template <typename T>
Var<T> global_layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps = T(1e-8)) {
    const int C = x->value.rows(), Tlen = x->value.cols();
    if (static_cast<int>(gain->value.size()) != C || static_cast<int>(bias->value.size()) != C)
        throw std::invalid_argument("global_layer_norm: gain/bias size mismatch");
    const size_t N = x->value.size();
    T mean = T(0);
    for (const T v : x->value.data) mean += v;
    mean /= static_cast<T>(N);
    T var = T(0);
    for (const T v : x->value.data) var += (v - mean) * (v - mean);
    var /= static_cast<T>(N);
    const T inv_std = T(1) / std::sqrt(var + eps);

    Tensor<T> out({C, Tlen});
    for (int c = 0; c < C; ++c)
        for (int t = 0; t < Tlen; ++t)
            out.at(c, t) =
                (x->value.at(c, t) - mean) * inv_std * gain->value.data[c] + bias->value.data[c];
    auto n = detail::make_op(std::move(out), {x, gain, bias});
    n->backward_fn = [n_raw = n.get(), x, gain, bias, C, Tlen, mean, inv_std, N] {
        // xhat_i = (x_i - mean) * inv_std; y = g_c * xhat + b_c
        T sum_gd = T(0), sum_gdx = T(0);
        for (int c = 0; c < C; ++c)
            for (int t = 0; t < Tlen; ++t) {
                const T g = n_raw->grad.at(c, t) * gain->value.data[c];
                const T xh = (x->value.at(c, t) - mean) * inv_std;
                sum_gd += g;
                sum_gdx += g * xh;
            }
        for (int c = 0; c < C; ++c)
            for (int t = 0; t < Tlen; ++t) {
                const T d = n_raw->grad.at(c, t);
                const T xh = (x->value.at(c, t) - mean) * inv_std;
                if (gain->requires_grad) gain->grad.data[c] += d * xh;
                if (bias->requires_grad) bias->grad.data[c] += d;
                if (x->requires_grad)
                    x->grad.at(c, t) +=
                        inv_std * (d * gain->value.data[c] - (sum_gd + xh * sum_gdx) /
                                                                 static_cast<T>(N));
            }
    };
    return n;
}

// ---- parameter store & optimizer ------------------------------------------

template <typename T>
struct ParamStore {
    std::map<std::string, Var<T>> params;  // ordered; iteration order is stable

    Var<T> create(const std::string& name, std::vector<int> shape, std::mt19937_64& rng,
                  double init_scale = -1.0) {
        if (params.count(name)) throw std::invalid_argument("duplicate parameter " + name);
        Tensor<T> t(shape);
        if (init_scale != 0.0) {
            int fan_in = 1;
            for (size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
            const double s = init_scale > 0 ? init_scale : std::sqrt(1.0 / std::max(1, fan_in));
            std::uniform_real_distribution<double> u(-s, s);
            for (auto& v : t.data) v = static_cast<T>(u(rng));
        }
        auto p = parameter(std::move(t));
        params[name] = p;
        return p;
    }

    void zero_grads() {
        for (auto& [_, p] : params) zero_grad(p);
    }

    bool grads_finite() const {
        for (const auto& [_, p] : params)
            for (const T g : p->grad.data)
                if (!std::isfinite(static_cast<double>(g))) return false;
        return true;
    }
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
class Adam {
   public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(ParamStore<T>& store) {
        if (!store.grads_finite())
            throw std::runtime_error("optimizer_step: non-finite gradient");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
        const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
        for (auto& [name, p] : store.params) {
            auto& m = m_[name];
            auto& v = v_[name];
            if (m.size() != p->value.size()) {
                m.assign(p->value.size(), 0.0);
                v.assign(p->value.size(), 0.0);
            }
            for (size_t i = 0; i < p->value.size(); ++i) {
                const double g = static_cast<double>(p->grad.data[i]);
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
                const double mhat = m[i] / bc1, vhat = v[i] / bc2;
                p->value.data[i] -=
                    static_cast<T>(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
            }
        }
    }

    int64_t step_count() const { return t_; }
    std::map<std::string, std::vector<double>>& moment1() { return m_; }
    std::map<std::string, std::vector<double>>& moment2() { return v_; }
    void set_step_count(int64_t t) { t_ = t; }

   private:
    AdamConfig cfg_;
    int64_t t_ = 0;
    std::map<std::string, std::vector<double>> m_, v_;
};

}  // namespace mlook::nn

#endif
