#pragma once

#include <cmath>
#include <cstring>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <utility>

#include "swinecat/common.hpp"

namespace swinecat {

// ---------------------------------------------------------------------------
// Tensor: dense row-major n-d array with optional gradient buffer. A Tensor
// is a cheap handle onto shared storage; values are treated as immutable
// after creation except for explicit in-place optimizer updates.
//
// The element type is a template parameter: float is the production mode,
// double exists for gradient checking.
// ---------------------------------------------------------------------------

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad; // allocated on first use when requires_grad
    bool requires_grad = false;
};

template <typename T>
class Tensor {
public:
    Tensor() : node_(std::make_shared<TensorNode<T>>()) {}

    explicit Tensor(Shape shape, T fill = T(0))
        : node_(std::make_shared<TensorNode<T>>()) {
        node_->shape = std::move(shape);
        node_->data.assign(shape_numel(node_->shape), fill);
    }

    Tensor(Shape shape, std::vector<T> values)
        : node_(std::make_shared<TensorNode<T>>()) {
        if (shape_numel(shape) != values.size()) {
            throw ShapeError("tensor init: shape " + shape_str(shape) + " needs " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(values.size()));
        }
        node_->shape = std::move(shape);
        node_->data = std::move(values);
    }

    static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, T v) { return Tensor(std::move(shape), v); }

    const Shape& shape() const { return node_->shape; }
    size_t rank() const { return node_->shape.size(); }
    size_t dim(size_t i) const { return node_->shape.at(i); }
    size_t size() const { return node_->data.size(); }

    T* data() { return node_->data.data(); }
    const T* data() const { return node_->data.data(); }
    std::vector<T>& vec() { return node_->data; }
    const std::vector<T>& vec() const { return node_->data; }

    bool requires_grad() const { return node_->requires_grad; }

    Tensor& set_requires_grad(bool on = true) {
        node_->requires_grad = on;
        return *this;
    }

    /// Gradient buffer, allocated (zeroed) on first access.
    std::vector<T>& grad() {
        if (node_->grad.size() != node_->data.size()) {
            node_->grad.assign(node_->data.size(), T(0));
        }
        return node_->grad;
    }

    bool has_grad() const { return node_->grad.size() == node_->data.size(); }

    void zero_grad() {
        if (!node_->grad.empty()) {
            std::fill(node_->grad.begin(), node_->grad.end(), T(0));
        }
    }

    /// Value of a scalar (single-element) tensor.
    T item() const {
        if (size() != 1) {
            throw ContractError("item(): tensor has " + std::to_string(size()) +
                                " elements, expected 1");
        }
        return node_->data[0];
    }

    T at(std::initializer_list<size_t> idx) const {
        if (idx.size() != rank()) {
            throw ShapeError("at(): index rank mismatch for shape " + shape_str(shape()));
        }
        size_t flat = 0;
        size_t axis = 0;
        for (size_t i : idx) {
            flat = flat * node_->shape[axis] + i;
            ++axis;
        }
        return node_->data[flat];
    }

    bool empty() const { return node_->data.empty() && node_->shape.empty(); }

    /// Deep copy of values (no grad, no tape linkage).
    Tensor clone() const {
        Tensor out(node_->shape, node_->data);
        return out;
    }

    std::shared_ptr<TensorNode<T>>& node() { return node_; }
    const std::shared_ptr<TensorNode<T>>& node() const { return node_; }

private:
    std::shared_ptr<TensorNode<T>> node_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// ---------------------------------------------------------------------------
// GradTape: ordered record of executed operations. Ops append themselves in
// execution order (a topological order by construction); backward() replays
// the records exactly once in reverse. A tape is single-owner: activate it
// with a Scope on the thread that runs the forward pass.
// ---------------------------------------------------------------------------

template <typename T>
class GradTape {
public:
    class Scope {
    public:
        explicit Scope(GradTape& tape) : prev_(active_slot()) { active_slot() = &tape; }
        ~Scope() { active_slot() = prev_; }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        GradTape* prev_;
    };

    static GradTape* active() { return active_slot(); }

    void record(std::function<void()> backward_fn) {
        records_.push_back(std::move(backward_fn));
    }

    size_t size() const { return records_.size(); }

    /// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
    /// recorded operand with requires_grad. The tape is kept until clear().
    void backward(Tensor<T>& loss) {
        if (loss.size() != 1) {
            throw ContractError("backward: loss must be scalar, got shape " +
                                shape_str(loss.shape()));
        }
        if (!loss.requires_grad()) {
            throw ContractError("backward: loss does not participate in the tape");
        }
        loss.grad()[0] += T(1);
        for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
            (*it)();
        }
    }

    void clear() { records_.clear(); }

private:
    static GradTape*& active_slot() {
        thread_local GradTape* current = nullptr;
        return current;
    }

    std::vector<std::function<void()>> records_;
};

namespace detail {

template <typename T>
inline bool track(const Tensor<T>& a) {
    return GradTape<T>::active() != nullptr && a.requires_grad();
}

template <typename T>
inline bool track(const Tensor<T>& a, const Tensor<T>& b) {
    return GradTape<T>::active() != nullptr && (a.requires_grad() || b.requires_grad());
}

template <typename T>
inline void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
}

// --- raw matmul kernels, all accumulate into C ------------------------------

// C[m,n] += A[m,k] * B[k,n]
template <typename T>
void mm_nn(T* c, const T* a, const T* b, size_t m, size_t k, size_t n) {
    parallel_for(m, 16, [=](size_t i0, size_t i1) {
        for (size_t i = i0; i < i1; ++i) {
            T* crow = c + i * n;
            const T* arow = a + i * k;
            for (size_t p = 0; p < k; ++p) {
                T aip = arow[p];
                const T* brow = b + p * n;
                for (size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
            }
        }
    });
}

// C[m,n] += A[m,k] * B[n,k]^T
template <typename T>
void mm_nt(T* c, const T* a, const T* b, size_t m, size_t k, size_t n) {
    parallel_for(m, 16, [=](size_t i0, size_t i1) {
        for (size_t i = i0; i < i1; ++i) {
            T* crow = c + i * n;
            const T* arow = a + i * k;
            for (size_t j = 0; j < n; ++j) {
                const T* brow = b + j * k;
                T acc = T(0);
                for (size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
                crow[j] += acc;
            }
        }
    });
}

// C[m,n] += A[k,m]^T * B[k,n]
template <typename T>
void mm_tn(T* c, const T* a, const T* b, size_t m, size_t k, size_t n) {
    parallel_for(m, 16, [=](size_t i0, size_t i1) {
        for (size_t i = i0; i < i1; ++i) {
            T* crow = c + i * n;
            for (size_t p = 0; p < k; ++p) {
                T api = a[p * m + i];
                const T* brow = b + p * n;
                for (size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
            }
        }
    });
}

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and scalar ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape("add", a, b);
    Tensor<T> out(a.shape());
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    for (size_t i = 0; i < out.size(); ++i) po[i] = pa[i] + pb[i];
    if (detail::track(a, b)) {
        out.set_requires_grad();
        auto an = a.node(), bn = b.node(), on = out.node();
        GradTape<T>::active()->record([an, bn, on] {
            const auto& g = on->grad;
            if (an->requires_grad) {
                if (an->grad.size() != an->data.size()) an->grad.assign(an->data.size(), T(0));
                for (size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i];
            }
            if (bn->requires_grad) {
                if (bn->grad.size() != bn->data.size()) bn->grad.assign(bn->data.size(), T(0));
                for (size_t i = 0; i < g.size(); ++i) bn->grad[i] += g[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> multiply(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape("multiply", a, b);
    Tensor<T> out(a.shape());
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    for (size_t i = 0; i < out.size(); ++i) po[i] = pa[i] * pb[i];
    if (detail::track(a, b)) {
        out.set_requires_grad();
        auto an = a.node(), bn = b.node(), on = out.node();
        GradTape<T>::active()->record([an, bn, on] {
            const auto& g = on->grad;
            if (an->requires_grad) {
                if (an->grad.size() != an->data.size()) an->grad.assign(an->data.size(), T(0));
                for (size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i] * bn->data[i];
            }
            if (bn->requires_grad) {
                if (bn->grad.size() != bn->data.size()) bn->grad.assign(bn->data.size(), T(0));
                for (size_t i = 0; i < g.size(); ++i) bn->grad[i] += g[i] * an->data[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
    Tensor<T> out(a.shape());
    const T* pa = a.data();
    T* po = out.data();
    for (size_t i = 0; i < out.size(); ++i) po[i] = pa[i] * factor;
    if (detail::track(a)) {
        out.set_requires_grad();
        auto an = a.node(), on = out.node();
        GradTape<T>::active()->record([an, on, factor] {
            if (an->grad.size() != an->data.size()) an->grad.assign(an->data.size(), T(0));
            const auto& g = on->grad;
            for (size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i] * factor;
        });
    }
    return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    Tensor<T> out(a.shape());
    const T* pa = a.data();
    T* po = out.data();
    for (size_t i = 0; i < out.size(); ++i) {
        po[i] = T(1) / (T(1) + std::exp(-pa[i]));
    }
    if (detail::track(a)) {
        out.set_requires_grad();
        auto an = a.node(), on = out.node();
        GradTape<T>::active()->record([an, on] {
            if (an->grad.size() != an->data.size()) an->grad.assign(an->data.size(), T(0));
            for (size_t i = 0; i < on->grad.size(); ++i) {
                T s = on->data[i];
                an->grad[i] += on->grad[i] * s * (T(1) - s);
            }
        });
    }
    return out;
}

/// Exact Gaussian-CDF GELU: x * Phi(x) with Phi computed via erf.
template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
    constexpr T inv_sqrt2 = T(0.70710678118654752440084436210485L);
    Tensor<T> out(a.shape());
    const T* pa = a.data();
    T* po = out.data();
    for (size_t i = 0; i < out.size(); ++i) {
        T x = pa[i];
        po[i] = x * T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
    }
    if (detail::track(a)) {
        out.set_requires_grad();
        auto an = a.node(), on = out.node();
        GradTape<T>::active()->record([an, on] {
            constexpr T inv_sqrt2pi = T(0.39894228040143267793994605993438L);
            if (an->grad.size() != an->data.size()) an->grad.assign(an->data.size(), T(0));
            for (size_t i = 0; i < on->grad.size(); ++i) {
                T x = an->data[i];
                T cdf = T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
                T pdf = inv_sqrt2pi * std::exp(T(-0.5) * x * x);
                an->grad[i] += on->grad[i] * (cdf + x * pdf);
            }
        });
    }
    return out;
}

/// Inverted dropout. In train mode each element is dropped with probability p
/// and survivors are scaled by 1/(1-p); eval mode is the identity.
template <typename T>
Tensor<T> dropout(const Tensor<T>& a, double p, bool train, Rng& rng) {
    if (p < 0.0 || p >= 1.0) {
        throw ConfigError("dropout: p must be in [0, 1), got " + std::to_string(p));
    }
    if (!train || p == 0.0) {
        Tensor<T> out(a.shape(), a.vec());
        if (detail::track(a)) {
            out.set_requires_grad();
            auto an = a.node(), on = out.node();
            GradTape<T>::active()->record([an, on] {
                if (an->grad.size() != an->data.size()) an->grad.assign(an->data.size(), T(0));
                for (size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
            });
        }
        return out;
    }
    Tensor<T> out(a.shape());
    auto mask = std::make_shared<std::vector<T>>(a.size());
    T keep_scale = T(1.0 / (1.0 - p));
    const T* pa = a.data();
    T* po = out.data();
    for (size_t i = 0; i < out.size(); ++i) {
        T m = rng.uniform() < p ? T(0) : keep_scale;
        (*mask)[i] = m;
        po[i] = pa[i] * m;
    }
    if (detail::track(a)) {
        out.set_requires_grad();
        auto an = a.node(), on = out.node();
        GradTape<T>::active()->record([an, on, mask] {
            if (an->grad.size() != an->data.size()) an->grad.assign(an->data.size(), T(0));
            for (size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] * (*mask)[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape new_shape) {
    if (shape_numel(new_shape) != a.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                         shape_str(new_shape));
    }
    Tensor<T> out(std::move(new_shape), a.vec());
    if (detail::track(a)) {
        out.set_requires_grad();
        auto an = a.node(), on = out.node();
        GradTape<T>::active()->record([an, on] {
            if (an->grad.size() != an->data.size()) an->grad.assign(an->data.size(), T(0));
            for (size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
        });
    }
    return out;
}

namespace detail {

inline std::vector<size_t> row_major_strides(const Shape& s) {
    std::vector<size_t> st(s.size(), 1);
    for (size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
    return st;
}

// flat index map out -> in for a permutation of axes
inline void permute_index_map(const Shape& in_shape, const std::vector<size_t>& perm,
                              std::vector<size_t>& map) {
    Shape out_shape(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) out_shape[i] = in_shape[perm[i]];
    auto in_st = row_major_strides(in_shape);
    size_t n = shape_numel(in_shape);
    map.resize(n);
    size_t rank = perm.size();
    std::vector<size_t> idx(rank, 0);
    for (size_t o = 0; o < n; ++o) {
        size_t flat_in = 0;
        for (size_t d = 0; d < rank; ++d) flat_in += idx[d] * in_st[perm[d]];
        map[o] = flat_in;
        for (size_t d = rank; d-- > 0;) {
            if (++idx[d] < out_shape[d]) break;
            idx[d] = 0;
        }
    }
}

} // namespace detail

template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<size_t>& perm) {
    if (perm.size() != a.rank()) {
        throw ShapeError("permute: order size " + std::to_string(perm.size()) +
                         " does not match rank of " + shape_str(a.shape()));
    }
    std::vector<bool> seen(perm.size(), false);
    for (size_t p : perm) {
        if (p >= perm.size() || seen[p]) throw ShapeError("permute: invalid axis order");
        seen[p] = true;
    }
    Shape out_shape(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) out_shape[i] = a.dim(perm[i]);
    auto map = std::make_shared<std::vector<size_t>>();
    detail::permute_index_map(a.shape(), perm, *map);
    Tensor<T> out(out_shape);
    const T* pa = a.data();
    T* po = out.data();
    for (size_t o = 0; o < out.size(); ++o) po[o] = pa[(*map)[o]];
    if (detail::track(a)) {
        out.set_requires_grad();
        auto an = a.node(), on = out.node();
        GradTape<T>::active()->record([an, on, map] {
            if (an->grad.size() != an->data.size()) an->grad.assign(an->data.size(), T(0));
            for (size_t o = 0; o < on->grad.size(); ++o) an->grad[(*map)[o]] += on->grad[o];
        });
    }
    return out;
}

/// 2-D transpose convenience.
template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
    if (a.rank() != 2) {
        throw ShapeError("transpose: expected rank-2 tensor, got " + shape_str(a.shape()));
    }
    return permute(a, {1, 0});
}

template <typename T>
Tensor<T> concatenate(const std::vector<Tensor<T>>& parts, size_t axis) {
    if (parts.empty()) throw ContractError("concatenate: no inputs");
    const Shape& base = parts[0].shape();
    if (axis >= base.size()) throw ShapeError("concatenate: axis out of range");
    size_t axis_total = 0;
    for (const auto& p : parts) {
        if (p.rank() != base.size()) {
            throw ShapeError("concatenate: rank mismatch " + shape_str(p.shape()) + " vs " +
                             shape_str(base));
        }
        for (size_t d = 0; d < base.size(); ++d) {
            if (d != axis && p.dim(d) != base[d]) {
                throw ShapeError("concatenate: shape mismatch " + shape_str(p.shape()) +
                                 " vs " + shape_str(base));
            }
        }
        axis_total += p.dim(axis);
    }
    Shape out_shape = base;
    out_shape[axis] = axis_total;

    size_t outer = 1;
    for (size_t d = 0; d < axis; ++d) outer *= base[d];
    size_t inner = 1;
    for (size_t d = axis + 1; d < base.size(); ++d) inner *= base[d];

    Tensor<T> out(out_shape);
    T* po = out.data();
    size_t out_row = axis_total * inner;
    size_t offset = 0;
    bool any_grad = false;
    for (const auto& p : parts) any_grad = any_grad || p.requires_grad();

    struct Piece {
        std::shared_ptr<TensorNode<T>> node;
        size_t offset;
        size_t width;
    };
    auto pieces = std::make_shared<std::vector<Piece>>();
    for (const auto& p : parts) {
        size_t width = p.dim(axis) * inner;
        const T* pp = p.data();
        for (size_t o = 0; o < outer; ++o) {
            std::memcpy(po + o * out_row + offset, pp + o * width, width * sizeof(T));
        }
        pieces->push_back({p.node(), offset, width});
        offset += width;
    }
    if (GradTape<T>::active() && any_grad) {
        out.set_requires_grad();
        auto on = out.node();
        GradTape<T>::active()->record([on, pieces, outer, out_row] {
            for (auto& piece : *pieces) {
                if (!piece.node->requires_grad) continue;
                auto& g = piece.node->grad;
                if (g.size() != piece.node->data.size()) g.assign(piece.node->data.size(), T(0));
                for (size_t o = 0; o < outer; ++o) {
                    const T* src = on->grad.data() + o * out_row + piece.offset;
                    T* dst = g.data() + o * piece.width;
                    for (size_t i = 0; i < piece.width; ++i) dst[i] += src[i];
                }
            }
        });
    }
    return out;
}

/// Selects index i along axis 0, dropping that axis.
template <typename T>
Tensor<T> index_axis0(const Tensor<T>& a, size_t i) {
    if (a.rank() == 0 || i >= a.dim(0)) {
        throw ShapeError("index_axis0: index " + std::to_string(i) + " out of range for " +
                         shape_str(a.shape()));
    }
    Shape out_shape(a.shape().begin() + 1, a.shape().end());
    size_t slab = shape_numel(out_shape);
    Tensor<T> out(out_shape);
    std::memcpy(out.data(), a.data() + i * slab, slab * sizeof(T));
    if (detail::track(a)) {
        out.set_requires_grad();
        auto an = a.node(), on = out.node();
        GradTape<T>::active()->record([an, on, i, slab] {
            if (an->grad.size() != an->data.size()) an->grad.assign(an->data.size(), T(0));
            T* dst = an->grad.data() + i * slab;
            for (size_t k = 0; k < slab; ++k) dst[k] += on->grad[k];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

/// Mean over the given axes (sorted, unique); reduced axes are removed.
template <typename T>
Tensor<T> mean(const Tensor<T>& a, std::vector<size_t> axes) {
    std::sort(axes.begin(), axes.end());
    axes.erase(std::unique(axes.begin(), axes.end()), axes.end());
    for (size_t ax : axes) {
        if (ax >= a.rank()) throw ShapeError("mean: axis out of range for " + shape_str(a.shape()));
    }
    Shape out_shape;
    std::vector<bool> reduced(a.rank(), false);
    for (size_t ax : axes) reduced[ax] = true;
    size_t count = 1;
    for (size_t d = 0; d < a.rank(); ++d) {
        if (reduced[d]) count *= a.dim(d);
        else out_shape.push_back(a.dim(d));
    }
    if (count == 0) throw ContractError("mean: reducing over empty extent");

    // out flat index for each input flat index
    auto in_st = detail::row_major_strides(a.shape());
    auto out_st = detail::row_major_strides(out_shape);
    auto map = std::make_shared<std::vector<size_t>>(a.size());
    {
        std::vector<size_t> idx(a.rank(), 0);
        for (size_t f = 0; f < a.size(); ++f) {
            size_t of = 0, od = 0;
            for (size_t d = 0; d < a.rank(); ++d) {
                if (!reduced[d]) of += idx[d] * out_st[od++];
            }
            (*map)[f] = of;
            for (size_t d = a.rank(); d-- > 0;) {
                if (++idx[d] < a.dim(d)) break;
                idx[d] = 0;
            }
        }
    }
    Tensor<T> out(out_shape);
    T* po = out.data();
    const T* pa = a.data();
    for (size_t f = 0; f < a.size(); ++f) po[(*map)[f]] += pa[f];
    T inv = T(1) / T(count);
    for (size_t o = 0; o < out.size(); ++o) po[o] *= inv;
    if (detail::track(a)) {
        out.set_requires_grad();
        auto an = a.node(), on = out.node();
        GradTape<T>::active()->record([an, on, map, inv] {
            if (an->grad.size() != an->data.size()) an->grad.assign(an->data.size(), T(0));
            for (size_t f = 0; f < an->grad.size(); ++f) {
                an->grad[f] += on->grad[(*map)[f]] * inv;
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
    Tensor<T> out(Shape{});
    T acc = T(0);
    const T* pa = a.data();
    for (size_t i = 0; i < a.size(); ++i) acc += pa[i];
    out.data()[0] = acc;
    if (detail::track(a)) {
        out.set_requires_grad();
        auto an = a.node(), on = out.node();
        GradTape<T>::active()->record([an, on] {
            if (an->grad.size() != an->data.size()) an->grad.assign(an->data.size(), T(0));
            T g = on->grad[0];
            for (size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += g;
        });
    }
    return out;
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
    if (a.size() == 0) throw ContractError("mean_all: empty tensor");
    return scale(sum_all(a), T(1) / T(a.size()));
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    }
    size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor<T> out(Shape{m, n});
    detail::mm_nn(out.data(), a.data(), b.data(), m, k, n);
    if (detail::track(a, b)) {
        out.set_requires_grad();
        auto an = a.node(), bn = b.node(), on = out.node();
        GradTape<T>::active()->record([an, bn, on, m, k, n] {
            if (an->requires_grad) {
                if (an->grad.size() != an->data.size()) an->grad.assign(an->data.size(), T(0));
                detail::mm_nt(an->grad.data(), on->grad.data(), bn->data.data(), m, n, k);
            }
            if (bn->requires_grad) {
                if (bn->grad.size() != bn->data.size()) bn->grad.assign(bn->data.size(), T(0));
                detail::mm_tn(bn->grad.data(), an->data.data(), on->grad.data(), k, m, n);
            }
        });
    }
    return out;
}

/// Batched matmul over the leading axis: a[B,m,k] x b[B,k,n] -> [B,m,n].
/// trans_b treats b as [B,n,k] and multiplies by its transpose.
template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool trans_b = false) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0)) {
        throw ShapeError("bmm: expected matching rank-3 batches, got " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
    }
    size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
    size_t n = trans_b ? b.dim(1) : b.dim(2);
    size_t bk = trans_b ? b.dim(2) : b.dim(1);
    if (bk != k) {
        throw ShapeError("bmm: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) + (trans_b ? " (b transposed)" : ""));
    }
    Tensor<T> out(Shape{batch, m, n});
    const size_t a_sz = m * k, b_sz = b.dim(1) * b.dim(2), o_sz = m * n;
    for (size_t i = 0; i < batch; ++i) {
        if (trans_b) {
            detail::mm_nt(out.data() + i * o_sz, a.data() + i * a_sz, b.data() + i * b_sz, m, k, n);
        } else {
            detail::mm_nn(out.data() + i * o_sz, a.data() + i * a_sz, b.data() + i * b_sz, m, k, n);
        }
    }
    if (detail::track(a, b)) {
        out.set_requires_grad();
        auto an = a.node(), bn = b.node(), on = out.node();
        GradTape<T>::active()->record([an, bn, on, batch, m, k, n, a_sz, b_sz, o_sz, trans_b] {
            if (an->requires_grad && an->grad.size() != an->data.size())
                an->grad.assign(an->data.size(), T(0));
            if (bn->requires_grad && bn->grad.size() != bn->data.size())
                bn->grad.assign(bn->data.size(), T(0));
            for (size_t i = 0; i < batch; ++i) {
                const T* g = on->grad.data() + i * o_sz;
                const T* pa = an->data.data() + i * a_sz;
                const T* pb = bn->data.data() + i * b_sz;
                if (!trans_b) {
                    // dA += G B^T ; dB += A^T G
                    if (an->requires_grad)
                        detail::mm_nt(an->grad.data() + i * a_sz, g, pb, m, n, k);
                    if (bn->requires_grad)
                        detail::mm_tn(bn->grad.data() + i * b_sz, pa, g, k, m, n);
                } else {
                    // C = A B^T with B[n,k]: dA += G B ; dB += G^T A
                    if (an->requires_grad)
                        detail::mm_nn(an->grad.data() + i * a_sz, g, pb, m, n, k);
                    if (bn->requires_grad)
                        detail::mm_tn(bn->grad.data() + i * b_sz, g, pa, n, m, k);
                }
            }
        });
    }
    return out;
}

/// Affine layer: x[N,in] * w[in,out] + b[out] (bias broadcast over rows).
/// Pass an empty bias tensor to skip the bias term.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0)) {
        throw ShapeError("linear: incompatible shapes " + shape_str(x.shape()) + " x " +
                         shape_str(w.shape()));
    }
    bool has_bias = b.size() > 0;
    size_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
    if (has_bias && (b.rank() != 1 || b.dim(0) != n)) {
        throw ShapeError("linear: bias shape " + shape_str(b.shape()) + " does not match output width " +
                         std::to_string(n));
    }
    Tensor<T> out(Shape{m, n});
    T* po = out.data();
    if (has_bias) {
        const T* pb = b.data();
        for (size_t i = 0; i < m; ++i) std::memcpy(po + i * n, pb, n * sizeof(T));
    }
    detail::mm_nn(po, x.data(), w.data(), m, k, n);
    bool need = GradTape<T>::active() &&
                (x.requires_grad() || w.requires_grad() || (has_bias && b.requires_grad()));
    if (need) {
        out.set_requires_grad();
        auto xn = x.node(), wn = w.node(), bn = b.node(), on = out.node();
        GradTape<T>::active()->record([xn, wn, bn, on, m, k, n, has_bias] {
            const T* g = on->grad.data();
            if (xn->requires_grad) {
                if (xn->grad.size() != xn->data.size()) xn->grad.assign(xn->data.size(), T(0));
                detail::mm_nt(xn->grad.data(), g, wn->data.data(), m, n, k);
            }
            if (wn->requires_grad) {
                if (wn->grad.size() != wn->data.size()) wn->grad.assign(wn->data.size(), T(0));
                detail::mm_tn(wn->grad.data(), xn->data.data(), g, k, m, n);
            }
            if (has_bias && bn->requires_grad) {
                if (bn->grad.size() != bn->data.size()) bn->grad.assign(bn->data.size(), T(0));
                for (size_t i = 0; i < m; ++i) {
                    const T* grow = g + i * n;
                    for (size_t j = 0; j < n; ++j) bn->grad[j] += grow[j];
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normalization / activation structure ops
// ---------------------------------------------------------------------------

/// Numerically stable softmax along `axis` (max subtraction per slice).
template <typename T>
Tensor<T> softmax(const Tensor<T>& a, size_t axis) {
    if (axis >= a.rank()) {
        throw ShapeError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(a.shape()));
    }
    size_t len = a.dim(axis);
    size_t inner = 1;
    for (size_t d = axis + 1; d < a.rank(); ++d) inner *= a.dim(d);
    size_t outer = a.size() / (len * inner);

    Tensor<T> out(a.shape());
    const T* pa = a.data();
    T* po = out.data();
    for (size_t o = 0; o < outer; ++o) {
        for (size_t in = 0; in < inner; ++in) {
            size_t base = o * len * inner + in;
            T mx = pa[base];
            for (size_t l = 1; l < len; ++l) mx = std::max(mx, pa[base + l * inner]);
            T denom = T(0);
            for (size_t l = 0; l < len; ++l) {
                T e = std::exp(pa[base + l * inner] - mx);
                po[base + l * inner] = e;
                denom += e;
            }
            T inv = T(1) / denom;
            for (size_t l = 0; l < len; ++l) po[base + l * inner] *= inv;
        }
    }
    if (detail::track(a)) {
        out.set_requires_grad();
        auto an = a.node(), on = out.node();
        GradTape<T>::active()->record([an, on, outer, len, inner] {
            if (an->grad.size() != an->data.size()) an->grad.assign(an->data.size(), T(0));
            for (size_t o = 0; o < outer; ++o) {
                for (size_t in = 0; in < inner; ++in) {
                    size_t base = o * len * inner + in;
                    T dot = T(0);
                    for (size_t l = 0; l < len; ++l) {
                        size_t idx = base + l * inner;
                        dot += on->grad[idx] * on->data[idx];
                    }
                    for (size_t l = 0; l < len; ++l) {
                        size_t idx = base + l * inner;
                        an->grad[idx] += on->data[idx] * (on->grad[idx] - dot);
                    }
                }
            }
        });
    }
    return out;
}

/// Layer normalization over the last axis: per-slice zero mean / unit variance
/// (population variance, eps inside the sqrt) followed by gain/bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-5)) {
    if (x.rank() == 0) throw ShapeError("layer_norm: scalar input");
    size_t width = x.dim(x.rank() - 1);
    if (gain.size() != width || bias.size() != width) {
        throw ShapeError("layer_norm: gain/bias length must equal last axis (" +
                         std::to_string(width) + "), got " + shape_str(gain.shape()) + " / " +
                         shape_str(bias.shape()));
    }
    size_t rows = x.size() / width;
    Tensor<T> out(x.shape());
    auto xhat = std::make_shared<std::vector<T>>(x.size());
    auto inv_std = std::make_shared<std::vector<T>>(rows);
    const T* px = x.data();
    const T* pg = gain.data();
    const T* pb = bias.data();
    T* po = out.data();
    for (size_t r = 0; r < rows; ++r) {
        const T* row = px + r * width;
        T mu = T(0);
        for (size_t j = 0; j < width; ++j) mu += row[j];
        mu /= T(width);
        T var = T(0);
        for (size_t j = 0; j < width; ++j) {
            T d = row[j] - mu;
            var += d * d;
        }
        var /= T(width);
        T istd = T(1) / std::sqrt(var + eps);
        (*inv_std)[r] = istd;
        T* orow = po + r * width;
        T* hrow = xhat->data() + r * width;
        for (size_t j = 0; j < width; ++j) {
            T h = (row[j] - mu) * istd;
            hrow[j] = h;
            orow[j] = h * pg[j] + pb[j];
        }
    }
    bool need = GradTape<T>::active() &&
                (x.requires_grad() || gain.requires_grad() || bias.requires_grad());
    if (need) {
        out.set_requires_grad();
        auto xn = x.node(), gn = gain.node(), bn = bias.node(), on = out.node();
        GradTape<T>::active()->record([xn, gn, bn, on, xhat, inv_std, rows, width] {
            const T* g = on->grad.data();
            if (gn->requires_grad && gn->grad.size() != gn->data.size())
                gn->grad.assign(gn->data.size(), T(0));
            if (bn->requires_grad && bn->grad.size() != bn->data.size())
                bn->grad.assign(bn->data.size(), T(0));
            if (xn->requires_grad && xn->grad.size() != xn->data.size())
                xn->grad.assign(xn->data.size(), T(0));
            for (size_t r = 0; r < rows; ++r) {
                const T* grow = g + r * width;
                const T* hrow = xhat->data() + r * width;
                if (gn->requires_grad || bn->requires_grad) {
                    for (size_t j = 0; j < width; ++j) {
                        if (gn->requires_grad) gn->grad[j] += grow[j] * hrow[j];
                        if (bn->requires_grad) bn->grad[j] += grow[j];
                    }
                }
                if (xn->requires_grad) {
                    // dx = istd * (gy - mean(gy) - xhat * mean(gy*xhat)),  gy = gain .* g
                    T mean_gy = T(0), mean_gyh = T(0);
                    for (size_t j = 0; j < width; ++j) {
                        T gy = grow[j] * gn->data[j];
                        mean_gy += gy;
                        mean_gyh += gy * hrow[j];
                    }
                    mean_gy /= T(width);
                    mean_gyh /= T(width);
                    T istd = (*inv_std)[r];
                    T* xg = xn->grad.data() + r * width;
                    for (size_t j = 0; j < width; ++j) {
                        T gy = grow[j] * gn->data[j];
                        xg[j] += istd * (gy - mean_gy - hrow[j] * mean_gyh);
                    }
                }
            }
        });
    }
    return out;
}

/// 1-D cross-correlation along the last axis with zero padding of (k-1)/2,
/// single kernel shared across positions, no bias. Accepts any leading dims.
template <typename T>
Tensor<T> conv1d_channels(const Tensor<T>& z, const Tensor<T>& kernel) {
    if (kernel.rank() != 1 || kernel.size() == 0 || kernel.size() % 2 == 0) {
        throw ConfigError("conv1d_channels: kernel size must be odd and positive, got " +
                          shape_str(kernel.shape()));
    }
    if (z.rank() == 0 || z.size() == 0) {
        throw ShapeError("conv1d_channels: input must have at least one channel");
    }
    size_t channels = z.dim(z.rank() - 1);
    size_t rows = z.size() / channels;
    size_t k = kernel.size();
    long pad = static_cast<long>(k - 1) / 2;

    Tensor<T> out(z.shape());
    const T* pz = z.data();
    const T* pk = kernel.data();
    T* po = out.data();
    for (size_t r = 0; r < rows; ++r) {
        const T* row = pz + r * channels;
        T* orow = po + r * channels;
        for (size_t c = 0; c < channels; ++c) {
            T acc = T(0);
            for (size_t j = 0; j < k; ++j) {
                long src = static_cast<long>(c) + static_cast<long>(j) - pad;
                if (src >= 0 && src < static_cast<long>(channels)) acc += row[src] * pk[j];
            }
            orow[c] = acc;
        }
    }
    if (detail::track(z, kernel)) {
        out.set_requires_grad();
        auto zn = z.node(), kn = kernel.node(), on = out.node();
        GradTape<T>::active()->record([zn, kn, on, rows, channels, k, pad] {
            if (zn->requires_grad && zn->grad.size() != zn->data.size())
                zn->grad.assign(zn->data.size(), T(0));
            if (kn->requires_grad && kn->grad.size() != kn->data.size())
                kn->grad.assign(kn->data.size(), T(0));
            for (size_t r = 0; r < rows; ++r) {
                const T* grow = on->grad.data() + r * channels;
                const T* row = zn->data.data() + r * channels;
                for (size_t c = 0; c < channels; ++c) {
                    T g = grow[c];
                    if (g == T(0)) continue;
                    for (size_t j = 0; j < k; ++j) {
                        long src = static_cast<long>(c) + static_cast<long>(j) - pad;
                        if (src < 0 || src >= static_cast<long>(channels)) continue;
                        if (zn->requires_grad) zn->grad[r * channels + src] += g * kn->data[j];
                        if (kn->requires_grad) kn->grad[j] += g * row[src];
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Structured ops used by the attention pipeline
// ---------------------------------------------------------------------------

/// Rolls the two axes before the last one (the H and W of [..., H, W, C])
/// by (dr, dc) with wraparound. roll2d(roll2d(x, a, b), -a, -b) == x.
template <typename T>
Tensor<T> roll2d(const Tensor<T>& x, long dr, long dc) {
    if (x.rank() < 3) {
        throw ShapeError("roll2d: expected rank >= 3, got " + shape_str(x.shape()));
    }
    size_t rank = x.rank();
    size_t h = x.dim(rank - 3), w = x.dim(rank - 2), c = x.dim(rank - 1);
    size_t outer = x.size() / (h * w * c);
    auto wrap = [](long v, size_t n) {
        long m = v % static_cast<long>(n);
        if (m < 0) m += static_cast<long>(n);
        return static_cast<size_t>(m);
    };
    Tensor<T> out(x.shape());
    const T* px = x.data();
    T* po = out.data();
    for (size_t o = 0; o < outer; ++o) {
        const T* src_base = px + o * h * w * c;
        T* dst_base = po + o * h * w * c;
        for (size_t i = 0; i < h; ++i) {
            size_t di = wrap(static_cast<long>(i) + dr, h);
            for (size_t j = 0; j < w; ++j) {
                size_t dj = wrap(static_cast<long>(j) + dc, w);
                std::memcpy(dst_base + (di * w + dj) * c, src_base + (i * w + j) * c,
                            c * sizeof(T));
            }
        }
    }
    if (detail::track(x)) {
        out.set_requires_grad();
        auto xn = x.node(), on = out.node();
        GradTape<T>::active()->record([xn, on, outer, h, w, c, dr, dc, wrap] {
            if (xn->grad.size() != xn->data.size()) xn->grad.assign(xn->data.size(), T(0));
            for (size_t o = 0; o < outer; ++o) {
                const T* g_base = on->grad.data() + o * h * w * c;
                T* dst = xn->grad.data() + o * h * w * c;
                for (size_t i = 0; i < h; ++i) {
                    size_t di = wrap(static_cast<long>(i) + dr, h);
                    for (size_t j = 0; j < w; ++j) {
                        size_t dj = wrap(static_cast<long>(j) + dc, w);
                        const T* srow = g_base + (di * w + dj) * c;
                        T* drow = dst + (i * w + j) * c;
                        for (size_t ch = 0; ch < c; ++ch) drow[ch] += srow[ch];
                    }
                }
            }
        });
    }
    return out;
}

/// Row gather: out[i, :] = table[idx[i], :]. Gradient scatter-adds into the
/// table, which makes it usable for learned bias lookups.
template <typename T>
Tensor<T> embedding_rows(const Tensor<T>& table, const std::vector<size_t>& idx) {
    if (table.rank() != 2) {
        throw ShapeError("embedding_rows: table must be rank-2, got " + shape_str(table.shape()));
    }
    size_t cols = table.dim(1);
    for (size_t i : idx) {
        if (i >= table.dim(0)) throw ContractError("embedding_rows: index out of range");
    }
    Tensor<T> out(Shape{idx.size(), cols});
    const T* pt = table.data();
    T* po = out.data();
    for (size_t i = 0; i < idx.size(); ++i) {
        std::memcpy(po + i * cols, pt + idx[i] * cols, cols * sizeof(T));
    }
    if (detail::track(table)) {
        out.set_requires_grad();
        auto tn = table.node(), on = out.node();
        auto indices = std::make_shared<std::vector<size_t>>(idx);
        GradTape<T>::active()->record([tn, on, indices, cols] {
            if (tn->grad.size() != tn->data.size()) tn->grad.assign(tn->data.size(), T(0));
            for (size_t i = 0; i < indices->size(); ++i) {
                const T* g = on->grad.data() + i * cols;
                T* dst = tn->grad.data() + (*indices)[i] * cols;
                for (size_t j = 0; j < cols; ++j) dst[j] += g[j];
            }
        });
    }
    return out;
}

/// Adds attention biases: attn[W,h,L,L] + bias[h,L,L] (broadcast over windows)
/// + mask[wm,L,L] (broadcast over heads; window w uses mask row w % wm).
/// Either bias or mask may be empty. The mask is a constant.
template <typename T>
Tensor<T> attn_bias_add(const Tensor<T>& attn, const Tensor<T>& bias, const Tensor<T>& mask) {
    if (attn.rank() != 4) {
        throw ShapeError("attn_bias_add: expected [windows, heads, L, L], got " +
                         shape_str(attn.shape()));
    }
    size_t nw = attn.dim(0), heads = attn.dim(1), l = attn.dim(2);
    if (attn.dim(3) != l) throw ShapeError("attn_bias_add: attention matrix must be square");
    bool has_bias = bias.size() > 0;
    bool has_mask = mask.size() > 0;
    if (has_bias && (bias.rank() != 3 || bias.dim(0) != heads || bias.dim(1) != l || bias.dim(2) != l)) {
        throw ShapeError("attn_bias_add: bias shape " + shape_str(bias.shape()) +
                         " does not match attention " + shape_str(attn.shape()));
    }
    size_t wm = has_mask ? mask.dim(0) : 1;
    if (has_mask && (mask.rank() != 3 || mask.dim(1) != l || mask.dim(2) != l || nw % wm != 0)) {
        throw ShapeError("attn_bias_add: mask shape " + shape_str(mask.shape()) +
                         " does not match attention " + shape_str(attn.shape()));
    }
    Tensor<T> out(attn.shape());
    const T* pa = attn.data();
    T* po = out.data();
    size_t ll = l * l;
    for (size_t w = 0; w < nw; ++w) {
        const T* pm = has_mask ? mask.data() + (w % wm) * ll : nullptr;
        for (size_t hd = 0; hd < heads; ++hd) {
            const T* pb = has_bias ? bias.data() + hd * ll : nullptr;
            const T* src = pa + (w * heads + hd) * ll;
            T* dst = po + (w * heads + hd) * ll;
            for (size_t e = 0; e < ll; ++e) {
                T v = src[e];
                if (pb) v += pb[e];
                if (pm) v += pm[e];
                dst[e] = v;
            }
        }
    }
    bool need = GradTape<T>::active() &&
                (attn.requires_grad() || (has_bias && bias.requires_grad()));
    if (need) {
        out.set_requires_grad();
        auto an = attn.node(), bn = bias.node(), on = out.node();
        GradTape<T>::active()->record([an, bn, on, nw, heads, ll, has_bias] {
            if (an->requires_grad) {
                if (an->grad.size() != an->data.size()) an->grad.assign(an->data.size(), T(0));
                for (size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
            }
            if (has_bias && bn->requires_grad) {
                if (bn->grad.size() != bn->data.size()) bn->grad.assign(bn->data.size(), T(0));
                for (size_t w = 0; w < nw; ++w) {
                    for (size_t hd = 0; hd < heads; ++hd) {
                        const T* g = on->grad.data() + (w * heads + hd) * ll;
                        T* dst = bn->grad.data() + hd * ll;
                        for (size_t e = 0; e < ll; ++e) dst[e] += g[e];
                    }
                }
            }
        });
    }
    return out;
}

/// Per-channel gating: out[b,i,j,c] = x[b,i,j,c] * w[b,c] for x[B,H,W,C].
template <typename T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& w) {
    if (x.rank() != 4 || w.rank() != 2 || w.dim(0) != x.dim(0) || w.dim(1) != x.dim(3)) {
        throw ShapeError("scale_channels: got x " + shape_str(x.shape()) + ", weights " +
                         shape_str(w.shape()));
    }
    size_t batch = x.dim(0), spatial = x.dim(1) * x.dim(2), c = x.dim(3);
    Tensor<T> out(x.shape());
    const T* px = x.data();
    const T* pw = w.data();
    T* po = out.data();
    for (size_t b = 0; b < batch; ++b) {
        const T* wrow = pw + b * c;
        for (size_t s = 0; s < spatial; ++s) {
            const T* xrow = px + (b * spatial + s) * c;
            T* orow = po + (b * spatial + s) * c;
            for (size_t ch = 0; ch < c; ++ch) orow[ch] = xrow[ch] * wrow[ch];
        }
    }
    if (detail::track(x, w)) {
        out.set_requires_grad();
        auto xn = x.node(), wn = w.node(), on = out.node();
        GradTape<T>::active()->record([xn, wn, on, batch, spatial, c] {
            if (xn->requires_grad && xn->grad.size() != xn->data.size())
                xn->grad.assign(xn->data.size(), T(0));
            if (wn->requires_grad && wn->grad.size() != wn->data.size())
                wn->grad.assign(wn->data.size(), T(0));
            for (size_t b = 0; b < batch; ++b) {
                for (size_t s = 0; s < spatial; ++s) {
                    size_t base = (b * spatial + s) * c;
                    for (size_t ch = 0; ch < c; ++ch) {
                        T g = on->grad[base + ch];
                        if (xn->requires_grad) xn->grad[base + ch] += g * wn->data[b * c + ch];
                        if (wn->requires_grad) wn->grad[b * c + ch] += g * xn->data[base + ch];
                    }
                }
            }
        });
    }
    return out;
}

/// Mean cross-entropy over the batch: -log softmax(logits)[label], computed
/// via log-sum-exp. Gradient: (softmax - onehot) / B.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) {
        throw ShapeError("cross_entropy: logits must be [batch, classes], got " +
                         shape_str(logits.shape()));
    }
    size_t batch = logits.dim(0), classes = logits.dim(1);
    if (labels.size() != batch) {
        throw ContractError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                            std::to_string(batch));
    }
    for (int lab : labels) {
        if (lab < 0 || static_cast<size_t>(lab) >= classes) {
            throw ContractError("cross_entropy: label " + std::to_string(lab) +
                                " outside [0, " + std::to_string(classes) + ")");
        }
    }
    auto probs = std::make_shared<std::vector<T>>(logits.size());
    const T* pl = logits.data();
    T loss = T(0);
    for (size_t b = 0; b < batch; ++b) {
        const T* row = pl + b * classes;
        T mx = row[0];
        for (size_t k = 1; k < classes; ++k) mx = std::max(mx, row[k]);
        T denom = T(0);
        for (size_t k = 0; k < classes; ++k) denom += std::exp(row[k] - mx);
        T lse = mx + std::log(denom);
        loss += lse - row[labels[b]];
        T* prow = probs->data() + b * classes;
        for (size_t k = 0; k < classes; ++k) prow[k] = std::exp(row[k] - lse);
    }
    Tensor<T> out = Tensor<T>::scalar(loss / T(batch));
    if (detail::track(logits)) {
        out.set_requires_grad();
        auto ln = logits.node(), on = out.node();
        auto labs = std::make_shared<std::vector<int>>(labels);
        GradTape<T>::active()->record([ln, on, probs, labs, batch, classes] {
            if (ln->grad.size() != ln->data.size()) ln->grad.assign(ln->data.size(), T(0));
            T g = on->grad[0] / T(batch);
            for (size_t b = 0; b < batch; ++b) {
                T* dst = ln->grad.data() + b * classes;
                const T* prow = probs->data() + b * classes;
                for (size_t k = 0; k < classes; ++k) dst[k] += g * prow[k];
                dst[(*labs)[b]] -= g;
            }
        });
    }
    return out;
}

} // namespace swinecat
