#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "cct/rng.hpp"
#include "cct/tensor.hpp"

namespace cct {

// ---------------------------------------------------------------------------
// indexing helpers
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::size_t> row_major_strides(const Shape& s) {
    std::vector<std::size_t> strides(s.size(), 1);
    for (std::size_t i = s.size(); i-- > 1;) strides[i - 1] = strides[i] * s[i];
    return strides;
}

// Numpy-style broadcast of two shapes; throws on incompatibility.
inline Shape broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
    const std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank, 1);
    for (std::size_t i = 0; i < rank; ++i) {
        std::size_t ea = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        std::size_t eb = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (ea != eb && ea != 1 && eb != 1) {
            throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " +
                             shape_str(b));
        }
        out[i] = std::max(ea, eb);
    }
    return out;
}

// Strides of `in` aligned to the broadcast result `out`; broadcast axes get
// stride 0 so the same element is revisited.
inline std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
    std::vector<std::size_t> strides(out.size(), 0);
    auto in_strides = row_major_strides(in);
    const std::size_t off = out.size() - in.size();
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] != 1) strides[off + i] = in_strides[i];
    }
    return strides;
}

// Visits every index of `out_shape`, handing the callback flat offsets into
// the output and both (possibly broadcast) inputs.
template <typename Fn>
void for_each_broadcast(const Shape& out_shape, const Shape& a_shape, const Shape& b_shape,
                        Fn&& fn) {
    const std::size_t total = shape_numel(out_shape);
    const auto sa = broadcast_strides(a_shape, out_shape);
    const auto sb = broadcast_strides(b_shape, out_shape);
    const std::size_t rank = out_shape.size();
    std::vector<std::size_t> idx(rank, 0);
    std::size_t ia = 0, ib = 0;
    for (std::size_t o = 0; o < total; ++o) {
        fn(o, ia, ib);
        for (std::size_t ax = rank; ax-- > 0;) {
            idx[ax]++;
            ia += sa[ax];
            ib += sb[ax];
            if (idx[ax] < out_shape[ax]) break;
            ia -= sa[ax] * out_shape[ax];
            ib -= sb[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
}

// Sum `grad` (laid out as `from`) down to shape `to` (a broadcast source).
template <typename T>
std::vector<T> reduce_grad_to(const std::vector<T>& grad, const Shape& from, const Shape& to) {
    std::vector<T> out(shape_numel(to), T(0));
    for_each_broadcast(from, to, to, [&](std::size_t o, std::size_t i, std::size_t) {
        out[i] += grad[o];
    });
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise arithmetic
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    auto an = a.node();
    auto bn = b.node();
    Shape out_shape = detail::broadcast_shapes(an->shape, bn->shape, "add");
    std::vector<T> out(shape_numel(out_shape));
    if (an->shape == bn->shape) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = an->values[i] + bn->values[i];
    } else {
        detail::for_each_broadcast(out_shape, an->shape, bn->shape,
                                   [&](std::size_t o, std::size_t ia, std::size_t ib) {
                                       out[o] = an->values[ia] + bn->values[ib];
                                   });
    }
    Tensor<T> y = detail::make_op_result<T>(out_shape, std::move(out), "add", {an, bn});
    if (y.requires_grad()) {
        Shape os = out_shape;
        y.node()->backprop = [an, bn, os](detail::Node<T>& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                auto r = detail::reduce_grad_to(self.grad, os, an->shape);
                for (std::size_t i = 0; i < r.size(); ++i) an->grad[i] += r[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                auto r = detail::reduce_grad_to(self.grad, os, bn->shape);
                for (std::size_t i = 0; i < r.size(); ++i) bn->grad[i] += r[i];
            }
        };
    }
    return y;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    auto an = a.node();
    auto bn = b.node();
    Shape out_shape = detail::broadcast_shapes(an->shape, bn->shape, "mul");
    std::vector<T> out(shape_numel(out_shape));
    detail::for_each_broadcast(out_shape, an->shape, bn->shape,
                               [&](std::size_t o, std::size_t ia, std::size_t ib) {
                                   out[o] = an->values[ia] * bn->values[ib];
                               });
    Tensor<T> y = detail::make_op_result<T>(out_shape, std::move(out), "mul", {an, bn});
    if (y.requires_grad()) {
        Shape os = out_shape;
        y.node()->backprop = [an, bn, os](detail::Node<T>& self) {
            if (an->requires_grad) {
                std::vector<T> ga(self.grad.size());
                detail::for_each_broadcast(os, an->shape, bn->shape,
                                           [&](std::size_t o, std::size_t, std::size_t ib) {
                                               ga[o] = self.grad[o] * bn->values[ib];
                                           });
                an->ensure_grad();
                auto r = detail::reduce_grad_to(ga, os, an->shape);
                for (std::size_t i = 0; i < r.size(); ++i) an->grad[i] += r[i];
            }
            if (bn->requires_grad) {
                std::vector<T> gb(self.grad.size());
                detail::for_each_broadcast(os, an->shape, bn->shape,
                                           [&](std::size_t o, std::size_t ia, std::size_t) {
                                               gb[o] = self.grad[o] * an->values[ia];
                                           });
                bn->ensure_grad();
                auto r = detail::reduce_grad_to(gb, os, bn->shape);
                for (std::size_t i = 0; i < r.size(); ++i) bn->grad[i] += r[i];
            }
        };
    }
    return y;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
    auto xn = x.node();
    std::vector<T> out(xn->values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xn->values[i] * factor;
    Tensor<T> y = detail::make_op_result<T>(xn->shape, std::move(out), "scale", {xn});
    if (y.requires_grad()) {
        y.node()->backprop = [xn, factor](detail::Node<T>& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i] * factor;
        };
    }
    return y;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return add(a, scale(b, T(-1)));
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    auto xn = x.node();
    T acc = T(0);
    for (const T& v : xn->values) acc += v;
    Tensor<T> y = detail::make_op_result<T>(Shape{}, {acc}, "sum", {xn});
    if (y.requires_grad()) {
        y.node()->backprop = [xn](detail::Node<T>& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += self.grad[0];
        };
    }
    return y;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

// ---------------------------------------------------------------------------
// shape manipulation
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape new_shape) {
    auto xn = x.node();
    if (shape_numel(new_shape) != xn->values.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(xn->shape) + " as " +
                         shape_str(new_shape));
    }
    Tensor<T> y = detail::make_op_result<T>(std::move(new_shape), xn->values, "reshape", {xn});
    if (y.requires_grad()) {
        y.node()->backprop = [xn](detail::Node<T>& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
        };
    }
    return y;
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& perm) {
    auto xn = x.node();
    const std::size_t rank = xn->shape.size();
    if (perm.size() != rank) throw ShapeError("permute: axis list must cover every axis");
    std::vector<bool> used(rank, false);
    Shape out_shape(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        if (perm[i] >= rank || used[perm[i]]) throw ShapeError("permute: invalid axis list");
        used[perm[i]] = true;
        out_shape[i] = xn->shape[perm[i]];
    }
    const auto in_strides = detail::row_major_strides(xn->shape);
    std::vector<std::size_t> gather(rank);
    for (std::size_t i = 0; i < rank; ++i) gather[i] = in_strides[perm[i]];

    const std::size_t total = xn->values.size();
    std::vector<T> out(total);
    std::vector<std::size_t> src_of(total);
    std::vector<std::size_t> idx(rank, 0);
    std::size_t src = 0;
    for (std::size_t o = 0; o < total; ++o) {
        out[o] = xn->values[src];
        src_of[o] = src;
        for (std::size_t ax = rank; ax-- > 0;) {
            idx[ax]++;
            src += gather[ax];
            if (idx[ax] < out_shape[ax]) break;
            src -= gather[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
    Tensor<T> y = detail::make_op_result<T>(std::move(out_shape), std::move(out), "permute", {xn});
    if (y.requires_grad()) {
        y.node()->backprop = [xn, src_of = std::move(src_of)](detail::Node<T>& self) {
            xn->ensure_grad();
            for (std::size_t o = 0; o < self.grad.size(); ++o) xn->grad[src_of[o]] += self.grad[o];
        };
    }
    return y;
}

// Contiguous sub-range along one axis.
template <typename T>
Tensor<T> narrow(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t len) {
    auto xn = x.node();
    if (axis >= xn->shape.size() || start + len > xn->shape[axis]) {
        throw ShapeError("narrow: range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of bounds for axis " +
                         std::to_string(axis) + " of " + shape_str(xn->shape));
    }
    Shape out_shape = xn->shape;
    out_shape[axis] = len;
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= xn->shape[i];
    for (std::size_t i = axis + 1; i < xn->shape.size(); ++i) inner *= xn->shape[i];
    const std::size_t in_axis = xn->shape[axis];

    std::vector<T> out(outer * len * inner);
    for (std::size_t o = 0; o < outer; ++o) {
        const T* src = xn->values.data() + (o * in_axis + start) * inner;
        T* dst = out.data() + o * len * inner;
        std::copy(src, src + len * inner, dst);
    }
    Tensor<T> y = detail::make_op_result<T>(std::move(out_shape), std::move(out), "narrow", {xn});
    if (y.requires_grad()) {
        y.node()->backprop = [xn, axis, start, len, outer, inner, in_axis](detail::Node<T>& self) {
            xn->ensure_grad();
            for (std::size_t o = 0; o < outer; ++o) {
                const T* g = self.grad.data() + o * len * inner;
                T* dst = xn->grad.data() + (o * in_axis + start) * inner;
                for (std::size_t i = 0; i < len * inner; ++i) dst[i] += g[i];
            }
        };
    }
    return y;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
    if (parts.empty()) throw UsageError("concat: needs at least one input");
    const Shape& base = parts[0].shape();
    if (axis >= base.size()) throw ShapeError("concat: axis out of range");
    std::size_t axis_total = 0;
    for (const auto& p : parts) {
        if (p.rank() != base.size()) throw ShapeError("concat: rank mismatch");
        for (std::size_t i = 0; i < base.size(); ++i) {
            if (i != axis && p.shape()[i] != base[i]) {
                throw ShapeError("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
                                 shape_str(base));
            }
        }
        axis_total += p.shape()[axis];
    }
    Shape out_shape = base;
    out_shape[axis] = axis_total;
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= base[i];
    for (std::size_t i = axis + 1; i < base.size(); ++i) inner *= base[i];

    std::vector<T> out(shape_numel(out_shape));
    std::size_t axis_off = 0;
    for (const auto& p : parts) {
        const std::size_t plen = p.shape()[axis];
        const auto& pv = p.values();
        for (std::size_t o = 0; o < outer; ++o) {
            const T* src = pv.data() + o * plen * inner;
            T* dst = out.data() + (o * axis_total + axis_off) * inner;
            std::copy(src, src + plen * inner, dst);
        }
        axis_off += plen;
    }

    std::vector<std::shared_ptr<detail::Node<T>>> nodes;
    nodes.reserve(parts.size());
    for (const auto& p : parts) nodes.push_back(p.node());
    Tensor<T> y(out_shape, std::move(out));
    auto& yn = *y.node();
    yn.op = "concat";
    if (detail::nan_check_enabled()) detail::check_finite(yn.values, "concat");
    for (const auto& n : nodes) {
        if (n->requires_grad) {
            yn.requires_grad = true;
            yn.parents.push_back(n);
        }
    }
    if (yn.requires_grad) {
        yn.backprop = [nodes, axis, outer, inner, axis_total](detail::Node<T>& self) {
            std::size_t grad_off = 0;
            for (const auto& n : nodes) {
                const std::size_t plen = n->shape[axis];
                if (n->requires_grad) {
                    n->ensure_grad();
                    for (std::size_t o = 0; o < outer; ++o) {
                        const T* g = self.grad.data() + (o * axis_total + grad_off) * inner;
                        T* dst = n->grad.data() + o * plen * inner;
                        for (std::size_t i = 0; i < plen * inner; ++i) dst[i] += g[i];
                    }
                }
                grad_off += plen;
            }
        };
    }
    return y;
}

template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& x, Shape target) {
    auto xn = x.node();
    Shape check = detail::broadcast_shapes(xn->shape, target, "broadcast_to");
    if (check != target) {
        throw ShapeError("broadcast_to: " + shape_str(xn->shape) + " does not broadcast to " +
                         shape_str(target));
    }
    std::vector<T> out(shape_numel(target));
    detail::for_each_broadcast(target, xn->shape, xn->shape,
                               [&](std::size_t o, std::size_t ia, std::size_t) {
                                   out[o] = xn->values[ia];
                               });
    Tensor<T> y = detail::make_op_result<T>(target, std::move(out), "broadcast_to", {xn});
    if (y.requires_grad()) {
        y.node()->backprop = [xn, target](detail::Node<T>& self) {
            xn->ensure_grad();
            auto r = detail::reduce_grad_to(self.grad, target, xn->shape);
            for (std::size_t i = 0; i < r.size(); ++i) xn->grad[i] += r[i];
        };
    }
    return y;
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

// Matrix product. Both operands rank 2, or `a` carrying extra leading batch
// axes with `b` either rank 2 (shared) or batched identically.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    auto an = a.node();
    auto bn = b.node();
    const Shape& sa = an->shape;
    const Shape& sb = bn->shape;
    if (sa.size() < 2 || sb.size() < 2) {
        throw ShapeError("matmul: operands must have rank >= 2, got " + shape_str(sa) + " and " +
                         shape_str(sb));
    }
    const std::size_t m = sa[sa.size() - 2];
    const std::size_t k = sa[sa.size() - 1];
    const std::size_t kb = sb[sb.size() - 2];
    const std::size_t n = sb[sb.size() - 1];
    const bool b_shared = sb.size() == 2 && sa.size() > 2;
    if (!b_shared && sa.size() != sb.size()) {
        throw ShapeError("matmul: batch ranks differ, " + shape_str(sa) + " vs " + shape_str(sb));
    }
    if (!b_shared) {
        for (std::size_t i = 0; i + 2 < sa.size(); ++i) {
            if (sa[i] != sb[i]) {
                throw ShapeError("matmul: batch extents differ, " + shape_str(sa) + " vs " +
                                 shape_str(sb));
            }
        }
    }
    if (k != kb) {
        throw ShapeError("matmul: inner extents disagree, " + shape_str(sa) + " vs " +
                         shape_str(sb));
    }

    std::size_t batches = 1;
    for (std::size_t i = 0; i + 2 < sa.size(); ++i) batches *= sa[i];
    Shape out_shape(sa.begin(), sa.end() - 2);
    out_shape.push_back(m);
    out_shape.push_back(n);

    const std::size_t a_step = m * k;
    const std::size_t b_step = b_shared ? 0 : k * n;
    const std::size_t o_step = m * n;
    std::vector<T> out(batches * o_step, T(0));
    for (std::size_t bi = 0; bi < batches; ++bi) {
        const T* pa = an->values.data() + bi * a_step;
        const T* pb = bn->values.data() + bi * b_step;
        T* po = out.data() + bi * o_step;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t kk = 0; kk < k; ++kk) {
                const T av = pa[i * k + kk];
                if (av == T(0)) continue;
                const T* pbrow = pb + kk * n;
                T* porow = po + i * n;
                for (std::size_t j = 0; j < n; ++j) porow[j] += av * pbrow[j];
            }
        }
    }

    Tensor<T> y = detail::make_op_result<T>(std::move(out_shape), std::move(out), "matmul",
                                            {an, bn});
    if (y.requires_grad()) {
        y.node()->backprop = [an, bn, batches, m, k, n, a_step, b_step,
                              o_step](detail::Node<T>& self) {
            if (an->requires_grad) an->ensure_grad();
            if (bn->requires_grad) bn->ensure_grad();
            for (std::size_t bi = 0; bi < batches; ++bi) {
                const T* g = self.grad.data() + bi * o_step;
                const T* pa = an->values.data() + bi * a_step;
                const T* pb = bn->values.data() + bi * b_step;
                if (an->requires_grad) {
                    T* da = an->grad.data() + bi * a_step;
                    for (std::size_t i = 0; i < m; ++i) {
                        for (std::size_t j = 0; j < n; ++j) {
                            const T gv = g[i * n + j];
                            if (gv == T(0)) continue;
                            const T* pbrow = pb + j;
                            for (std::size_t kk = 0; kk < k; ++kk) {
                                da[i * k + kk] += gv * pbrow[kk * n];
                            }
                        }
                    }
                }
                if (bn->requires_grad) {
                    T* db = bn->grad.data() + bi * b_step;
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        for (std::size_t i = 0; i < m; ++i) {
                            const T av = pa[i * k + kk];
                            if (av == T(0)) continue;
                            const T* grow = g + i * n;
                            T* dbrow = db + kk * n;
                            for (std::size_t j = 0; j < n; ++j) dbrow[j] += av * grow[j];
                        }
                    }
                }
            }
        };
    }
    return y;
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    auto xn = x.node();
    std::vector<T> out(xn->values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xn->values[i] > T(0) ? xn->values[i] : T(0);
    Tensor<T> y = detail::make_op_result<T>(xn->shape, std::move(out), "relu", {xn});
    if (y.requires_grad()) {
        y.node()->backprop = [xn](detail::Node<T>& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                if (xn->values[i] > T(0)) xn->grad[i] += self.grad[i];
            }
        };
    }
    return y;
}

namespace detail {

template <typename T>
inline T gelu_exact(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * T(0.7071067811865475)));
}

template <typename T>
inline T gelu_exact_grad(T x) {
    const T phi = T(0.5) * (T(1) + std::erf(x * T(0.7071067811865475)));
    const T pdf = std::exp(T(-0.5) * x * x) * T(0.3989422804014327);
    return phi + x * pdf;
}

template <typename T>
inline T gelu_tanh(T x) {
    const T c = T(0.7978845608028654);  // sqrt(2/pi)
    const T u = c * (x + T(0.044715) * x * x * x);
    return T(0.5) * x * (T(1) + std::tanh(u));
}

template <typename T>
inline T gelu_tanh_grad(T x) {
    const T c = T(0.7978845608028654);
    const T u = c * (x + T(0.044715) * x * x * x);
    const T th = std::tanh(u);
    const T sech2 = T(1) - th * th;
    const T du = c * (T(1) + T(3) * T(0.044715) * x * x);
    return T(0.5) * (T(1) + th) + T(0.5) * x * sech2 * du;
}

}  // namespace detail

// GELU, exact erf form by default; tanh approximation selectable.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x, bool tanh_approx = false) {
    auto xn = x.node();
    std::vector<T> out(xn->values.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = tanh_approx ? detail::gelu_tanh(xn->values[i]) : detail::gelu_exact(xn->values[i]);
    }
    Tensor<T> y = detail::make_op_result<T>(xn->shape, std::move(out), "gelu", {xn});
    if (y.requires_grad()) {
        y.node()->backprop = [xn, tanh_approx](detail::Node<T>& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const T d = tanh_approx ? detail::gelu_tanh_grad(xn->values[i])
                                        : detail::gelu_exact_grad(xn->values[i]);
                xn->grad[i] += self.grad[i] * d;
            }
        };
    }
    return y;
}

// ---------------------------------------------------------------------------
// softmax / layer norm
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
    auto xn = x.node();
    if (axis >= xn->shape.size()) throw ShapeError("softmax: axis out of range");
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= xn->shape[i];
    for (std::size_t i = axis + 1; i < xn->shape.size(); ++i) inner *= xn->shape[i];
    const std::size_t len = xn->shape[axis];

    std::vector<T> out(xn->values.size());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * len * inner + in;
            T mx = xn->values[base];
            for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, xn->values[base + j * inner]);
            T denom = T(0);
            for (std::size_t j = 0; j < len; ++j) {
                const T e = std::exp(xn->values[base + j * inner] - mx);
                out[base + j * inner] = e;
                denom += e;
            }
            for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= denom;
        }
    }
    Tensor<T> y = detail::make_op_result<T>(xn->shape, std::move(out), "softmax", {xn});
    if (y.requires_grad()) {
        auto yn = y.node();
        std::vector<T> probs = yn->values;
        yn->backprop = [xn, outer, inner, len, probs = std::move(probs)](detail::Node<T>& self) {
            xn->ensure_grad();
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t in = 0; in < inner; ++in) {
                    const std::size_t base = o * len * inner + in;
                    T dot = T(0);
                    for (std::size_t j = 0; j < len; ++j) {
                        dot += self.grad[base + j * inner] * probs[base + j * inner];
                    }
                    for (std::size_t j = 0; j < len; ++j) {
                        const std::size_t at = base + j * inner;
                        xn->grad[at] += probs[at] * (self.grad[at] - dot);
                    }
                }
            }
        };
    }
    return y;
}

// Layer normalization over the last axis: per-row zero mean and unit
// variance (population), then affine gamma/beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5)) {
    auto xn = x.node();
    auto gn = gamma.node();
    auto bn = beta.node();
    if (xn->shape.empty()) throw ShapeError("layer_norm: input must have rank >= 1");
    const std::size_t d = xn->shape.back();
    if (gn->values.size() != d || bn->values.size() != d) {
        throw ShapeError("layer_norm: gamma/beta must match last axis extent " + std::to_string(d));
    }
    const std::size_t rows = xn->values.size() / d;
    std::vector<T> out(xn->values.size());
    std::vector<T> xhat(xn->values.size());
    std::vector<T> inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* px = xn->values.data() + r * d;
        T mu = T(0);
        for (std::size_t j = 0; j < d; ++j) mu += px[j];
        mu /= static_cast<T>(d);
        T var = T(0);
        for (std::size_t j = 0; j < d; ++j) {
            const T c = px[j] - mu;
            var += c * c;
        }
        var /= static_cast<T>(d);
        const T inv = T(1) / std::sqrt(var + eps);
        inv_std[r] = inv;
        for (std::size_t j = 0; j < d; ++j) {
            const T h = (px[j] - mu) * inv;
            xhat[r * d + j] = h;
            out[r * d + j] = h * gn->values[j] + bn->values[j];
        }
    }
    Tensor<T> y = detail::make_op_result<T>(xn->shape, std::move(out), "layer_norm", {xn, gn, bn});
    if (y.requires_grad()) {
        y.node()->backprop = [xn, gn, bn, rows, d, xhat = std::move(xhat),
                              inv_std = std::move(inv_std)](detail::Node<T>& self) {
            if (xn->requires_grad) xn->ensure_grad();
            if (gn->requires_grad) gn->ensure_grad();
            if (bn->requires_grad) bn->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r) {
                const T* g = self.grad.data() + r * d;
                const T* h = xhat.data() + r * d;
                if (gn->requires_grad || bn->requires_grad) {
                    for (std::size_t j = 0; j < d; ++j) {
                        if (gn->requires_grad) gn->grad[j] += g[j] * h[j];
                        if (bn->requires_grad) bn->grad[j] += g[j];
                    }
                }
                if (xn->requires_grad) {
                    T sum_g = T(0), sum_gh = T(0);
                    for (std::size_t j = 0; j < d; ++j) {
                        const T gg = g[j] * gn->values[j];
                        sum_g += gg;
                        sum_gh += gg * h[j];
                    }
                    const T invd = T(1) / static_cast<T>(d);
                    for (std::size_t j = 0; j < d; ++j) {
                        const T gg = g[j] * gn->values[j];
                        xn->grad[r * d + j] +=
                            inv_std[r] * (gg - sum_g * invd - h[j] * sum_gh * invd);
                    }
                }
            }
        };
    }
    return y;
}

// ---------------------------------------------------------------------------
// dropout
// ---------------------------------------------------------------------------

// Inverted dropout: survivors scaled by 1/(1-rate) so the expectation is
// preserved. Identity when not training or rate == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, RngStream& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0) {
        throw UsageError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
    }
    if (!training || rate == 0.0) return x;
    auto xn = x.node();
    const T keep_scale = T(1.0 / (1.0 - rate));
    std::vector<T> mask(xn->values.size());
    std::vector<T> out(xn->values.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const bool keep = rng.uniform01() >= rate;
        mask[i] = keep ? keep_scale : T(0);
        out[i] = xn->values[i] * mask[i];
    }
    Tensor<T> y = detail::make_op_result<T>(xn->shape, std::move(out), "dropout", {xn});
    if (y.requires_grad()) {
        y.node()->backprop = [xn, mask = std::move(mask)](detail::Node<T>& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i] * mask[i];
        };
    }
    return y;
}

// ---------------------------------------------------------------------------
// cross entropy
// ---------------------------------------------------------------------------

// Mean negative log-softmax of the true category, computed in the log
// domain. logits: [N x C], labels: N category indices.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
    auto ln = logits.node();
    if (ln->shape.size() != 2) {
        throw ShapeError("cross_entropy: logits must be [N x C], got " + shape_str(ln->shape));
    }
    const std::size_t n = ln->shape[0];
    const std::size_t c = ln->shape[1];
    if (labels.size() != n) {
        throw DataError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(n) + " rows");
    }
    std::vector<T> probs(ln->values.size());
    T loss = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= c) {
            throw DataError("cross_entropy: label " + std::to_string(label) + " out of range [0, " +
                            std::to_string(c) + ") at row " + std::to_string(i));
        }
        const T* row = ln->values.data() + i * c;
        T mx = row[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        T denom = T(0);
        for (std::size_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
        const T lse = mx + std::log(denom);
        loss += lse - row[label];
        for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - lse);
    }
    loss /= static_cast<T>(n);
    Tensor<T> y = detail::make_op_result<T>(Shape{}, {loss}, "cross_entropy", {ln});
    if (y.requires_grad()) {
        y.node()->backprop = [ln, labels, n, c, probs = std::move(probs)](detail::Node<T>& self) {
            ln->ensure_grad();
            const T g = self.grad[0] / static_cast<T>(n);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    T p = probs[i * c + j];
                    if (j == static_cast<std::size_t>(labels[i])) p -= T(1);
                    ln->grad[i * c + j] += g * p;
                }
            }
        };
    }
    return y;
}

// ---------------------------------------------------------------------------
// conv2d / maxpool2d
// ---------------------------------------------------------------------------

namespace detail {

inline std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                                   std::size_t padding, const char* op, const char* dim) {
    const std::size_t padded = in + 2 * padding;
    if (padding >= kernel) {
        throw GeometryError(std::string(op) + ": padding " + std::to_string(padding) +
                            " must be smaller than kernel " + std::to_string(kernel));
    }
    if (padded < kernel) {
        throw GeometryError(std::string(op) + ": padded " + dim + " extent " +
                            std::to_string(in) + " + 2*" + std::to_string(padding) + " = " +
                            std::to_string(padded) + " is smaller than kernel " +
                            std::to_string(kernel));
    }
    const std::size_t out = (padded - kernel) / stride + 1;
    if (out == 0) {
        throw GeometryError(std::string(op) + ": output " + dim + " extent floor((" +
                            std::to_string(in) + " + 2*" + std::to_string(padding) + " - " +
                            std::to_string(kernel) + ")/" + std::to_string(stride) +
                            ") + 1 collapsed to zero");
    }
    return out;
}

}  // namespace detail

// 2-D cross-correlation (no kernel flip) with zero padding.
// input: [N x C x H x W], kernel: [O x C x k x k], bias: [O].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding) {
    auto in = input.node();
    auto kn = kernel.node();
    auto bn = bias.node();
    if (in->shape.size() != 4 || kn->shape.size() != 4) {
        throw ShapeError("conv2d: input " + shape_str(in->shape) + " and kernel " +
                         shape_str(kn->shape) + " must both be rank 4");
    }
    const std::size_t n = in->shape[0], c = in->shape[1], h = in->shape[2], w = in->shape[3];
    const std::size_t o = kn->shape[0], kc = kn->shape[1], kh = kn->shape[2], kw = kn->shape[3];
    if (kc != c) {
        throw ShapeError("conv2d: kernel channels " + shape_str(kn->shape) +
                         " do not match input " + shape_str(in->shape));
    }
    if (bn->values.size() != o) {
        throw ShapeError("conv2d: bias must have one entry per output channel");
    }
    if (stride == 0) throw UsageError("conv2d: stride must be positive");
    const std::size_t ho = detail::conv_out_extent(h, kh, stride, padding, "conv2d", "height");
    const std::size_t wo = detail::conv_out_extent(w, kw, stride, padding, "conv2d", "width");

    std::vector<T> out(n * o * ho * wo);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(padding);
    for (std::size_t ni = 0; ni < n; ++ni) {
        for (std::size_t oi = 0; oi < o; ++oi) {
            T* po = out.data() + ((ni * o + oi) * ho) * wo;
            const T* pk = kn->values.data() + oi * c * kh * kw;
            for (std::size_t y = 0; y < ho; ++y) {
                for (std::size_t x = 0; x < wo; ++x) {
                    T acc = bn->values[oi];
                    for (std::size_t ci = 0; ci < c; ++ci) {
                        const T* pi = in->values.data() + ((ni * c + ci) * h) * w;
                        const T* pkc = pk + ci * kh * kw;
                        for (std::size_t fy = 0; fy < kh; ++fy) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(y * stride + fy) - pad;
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                            for (std::size_t fx = 0; fx < kw; ++fx) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(x * stride + fx) - pad;
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                                acc += pi[iy * static_cast<std::ptrdiff_t>(w) + ix] *
                                       pkc[fy * kw + fx];
                            }
                        }
                    }
                    po[y * wo + x] = acc;
                }
            }
        }
    }

    Tensor<T> y = detail::make_op_result<T>({n, o, ho, wo}, std::move(out), "conv2d",
                                            {in, kn, bn});
    if (y.requires_grad()) {
        y.node()->backprop = [in, kn, bn, n, c, h, w, o, kh, kw, ho, wo, stride,
                              pad](detail::Node<T>& self) {
            if (in->requires_grad) in->ensure_grad();
            if (kn->requires_grad) kn->ensure_grad();
            if (bn->requires_grad) bn->ensure_grad();
            for (std::size_t ni = 0; ni < n; ++ni) {
                for (std::size_t oi = 0; oi < o; ++oi) {
                    const T* g = self.grad.data() + ((ni * o + oi) * ho) * wo;
                    const T* pk = kn->values.data() + oi * c * kh * kw;
                    for (std::size_t yy = 0; yy < ho; ++yy) {
                        for (std::size_t xx = 0; xx < wo; ++xx) {
                            const T gv = g[yy * wo + xx];
                            if (gv == T(0)) continue;
                            if (bn->requires_grad) bn->grad[oi] += gv;
                            for (std::size_t ci = 0; ci < c; ++ci) {
                                const std::size_t ibase = ((ni * c + ci) * h) * w;
                                const std::size_t kbase = (oi * c + ci) * kh * kw;
                                for (std::size_t fy = 0; fy < kh; ++fy) {
                                    const std::ptrdiff_t iy =
                                        static_cast<std::ptrdiff_t>(yy * stride + fy) - pad;
                                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                                    for (std::size_t fx = 0; fx < kw; ++fx) {
                                        const std::ptrdiff_t ix =
                                            static_cast<std::ptrdiff_t>(xx * stride + fx) - pad;
                                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w))
                                            continue;
                                        const std::size_t iidx =
                                            ibase + static_cast<std::size_t>(iy) * w +
                                            static_cast<std::size_t>(ix);
                                        if (kn->requires_grad) {
                                            kn->grad[kbase + fy * kw + fx] +=
                                                gv * in->values[iidx];
                                        }
                                        if (in->requires_grad) {
                                            in->grad[iidx] += gv * pk[ci * kh * kw + fy * kw + fx];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        };
    }
    return y;
}

// Window-wise maximum with -inf padding. input: [N x C x H x W].
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& input, std::size_t kernel, std::size_t stride,
                    std::size_t padding) {
    auto in = input.node();
    if (in->shape.size() != 4) {
        throw ShapeError("maxpool2d: input must be rank 4, got " + shape_str(in->shape));
    }
    const std::size_t n = in->shape[0], c = in->shape[1], h = in->shape[2], w = in->shape[3];
    if (stride == 0) throw UsageError("maxpool2d: stride must be positive");
    const std::size_t ho = detail::conv_out_extent(h, kernel, stride, padding, "maxpool2d",
                                                   "height");
    const std::size_t wo = detail::conv_out_extent(w, kernel, stride, padding, "maxpool2d",
                                                   "width");

    std::vector<T> out(n * c * ho * wo);
    std::vector<std::size_t> argmax(out.size());
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(padding);
    for (std::size_t nc = 0; nc < n * c; ++nc) {
        const T* pi = in->values.data() + nc * h * w;
        for (std::size_t y = 0; y < ho; ++y) {
            for (std::size_t x = 0; x < wo; ++x) {
                T best = -std::numeric_limits<T>::infinity();
                std::size_t best_idx = 0;
                for (std::size_t fy = 0; fy < kernel; ++fy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * stride + fy) - pad;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t fx = 0; fx < kernel; ++fx) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(x * stride + fx) - pad;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                        const std::size_t idx =
                            static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix);
                        if (pi[idx] > best) {
                            best = pi[idx];
                            best_idx = idx;
                        }
                    }
                }
                out[(nc * ho + y) * wo + x] = best;
                argmax[(nc * ho + y) * wo + x] = nc * h * w + best_idx;
            }
        }
    }

    Tensor<T> y = detail::make_op_result<T>({n, c, ho, wo}, std::move(out), "maxpool2d", {in});
    if (y.requires_grad()) {
        y.node()->backprop = [in, argmax = std::move(argmax)](detail::Node<T>& self) {
            in->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                in->grad[argmax[i]] += self.grad[i];
            }
        };
    }
    return y;
}

// ---------------------------------------------------------------------------
// composite helpers
// ---------------------------------------------------------------------------

// x [.. x d_in] * w [d_in x d_out] + b [d_out]
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    return add(matmul(x, w), b);
}

}  // namespace cct
