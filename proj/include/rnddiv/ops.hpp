#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rnddiv/kernels.hpp"
#include "rnddiv/tensor.hpp"

namespace rnddiv {

// out = x * W (+ bias per row), x[b x m], W[m x p], bias[p]
template <typename T>
TensorPtr<T> linear(const TensorPtr<T>& x, const TensorPtr<T>& w, const TensorPtr<T>& bias = nullptr) {
    if (x->shape.size() != 2 || w->shape.size() != 2 || x->shape[1] != w->shape[0]) {
        throw DimensionError("linear: input " + shape_str(x->shape) + " incompatible with weight " +
                             shape_str(w->shape));
    }
    const int64_t b = x->shape[0], m = x->shape[1], p = w->shape[1];
    if (bias && (bias->shape.size() != 1 || bias->shape[0] != p)) {
        throw DimensionError("linear: bias " + shape_str(bias->shape) + " incompatible with weight " +
                             shape_str(w->shape));
    }

    std::vector<T> out(static_cast<size_t>(b) * p, T(0));
    gemm_nn(x->value.data(), w->value.data(), out.data(), b, m, p);
    if (bias) {
        for (int64_t i = 0; i < b; ++i) {
            T* row = out.data() + i * p;
            for (int64_t j = 0; j < p; ++j) row[j] += bias->value[j];
        }
    }

    std::vector<TensorPtr<T>> parents = {x, w};
    if (bias) parents.push_back(bias);
    return make_op_output<T>(
        {b, p}, std::move(out), std::move(parents),
        [x, w, bias, b, m, p](Tensor<T>& self) {
            const T* dout = self.grad.data();
            if (x->requires_grad) {
                gemm_nt(dout, w->value.data(), x->grad_data(), b, p, m);
            }
            if (w->requires_grad) {
                gemm_tn(x->value.data(), dout, w->grad_data(), b, m, p);
            }
            if (bias && bias->requires_grad) {
                T* db = bias->grad_data();
                for (int64_t i = 0; i < b; ++i) {
                    const T* row = dout + i * p;
                    for (int64_t j = 0; j < p; ++j) db[j] += row[j];
                }
            }
        });
}

namespace detail {

// patchesT[(9c) x P] for one example, cross-correlation layout.
template <typename T>
void im2col_3x3(const T* img, int64_t c, int64_t h, int64_t w, int64_t stride, int64_t pad,
                int64_t ho, int64_t wo, T* patches) {
    const int64_t p_count = ho * wo;
    for (int64_t ci = 0; ci < c; ++ci) {
        const T* chan = img + ci * h * w;
        for (int64_t kh = 0; kh < 3; ++kh) {
            for (int64_t kw = 0; kw < 3; ++kw) {
                T* row = patches + (ci * 9 + kh * 3 + kw) * p_count;
                for (int64_t oh = 0; oh < ho; ++oh) {
                    const int64_t ih = oh * stride + kh - pad;
                    for (int64_t ow = 0; ow < wo; ++ow) {
                        const int64_t iw = ow * stride + kw - pad;
                        const bool in = ih >= 0 && ih < h && iw >= 0 && iw < w;
                        row[oh * wo + ow] = in ? chan[ih * w + iw] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_3x3(const T* patches, int64_t c, int64_t h, int64_t w, int64_t stride, int64_t pad,
                int64_t ho, int64_t wo, T* dimg) {
    const int64_t p_count = ho * wo;
    for (int64_t ci = 0; ci < c; ++ci) {
        T* chan = dimg + ci * h * w;
        for (int64_t kh = 0; kh < 3; ++kh) {
            for (int64_t kw = 0; kw < 3; ++kw) {
                const T* row = patches + (ci * 9 + kh * 3 + kw) * p_count;
                for (int64_t oh = 0; oh < ho; ++oh) {
                    const int64_t ih = oh * stride + kh - pad;
                    if (ih < 0 || ih >= h) continue;
                    for (int64_t ow = 0; ow < wo; ++ow) {
                        const int64_t iw = ow * stride + kw - pad;
                        if (iw < 0 || iw >= w) continue;
                        chan[ih * w + iw] += row[oh * wo + ow];
                    }
                }
            }
        }
    }
}

}  // namespace detail

// Cross-correlation, 3x3 kernels only. x[b x c x h x w], k[o x c x 3 x 3].
template <typename T>
TensorPtr<T> conv2d(const TensorPtr<T>& x, const TensorPtr<T>& kernel, int64_t stride, int64_t pad,
                    const TensorPtr<T>& bias = nullptr) {
    if (x->shape.size() != 4 || kernel->shape.size() != 4 || kernel->shape[2] != 3 || kernel->shape[3] != 3) {
        throw DimensionError("conv2d: need input [b x c x h x w] and kernel [o x c x 3 x 3], got " +
                             shape_str(x->shape) + " and " + shape_str(kernel->shape));
    }
    if (x->shape[1] != kernel->shape[1]) {
        throw DimensionError("conv2d: channel mismatch between input " + shape_str(x->shape) +
                             " and kernel " + shape_str(kernel->shape));
    }
    if (stride < 1 || pad < 0 || pad > 1) {
        throw ConfigError("conv2d: stride must be >= 1 and pad in {0, 1}");
    }
    const int64_t b = x->shape[0], c = x->shape[1], h = x->shape[2], w = x->shape[3];
    const int64_t o = kernel->shape[0];
    const int64_t ho = (h + 2 * pad - 3) / stride + 1;
    const int64_t wo = (w + 2 * pad - 3) / stride + 1;
    if (h + 2 * pad < 3 || w + 2 * pad < 3 || ho < 1 || wo < 1) {
        throw DimensionError("conv2d: output extent below 1 for input " + shape_str(x->shape));
    }
    if (bias && (bias->shape.size() != 1 || bias->shape[0] != o)) {
        throw DimensionError("conv2d: bias " + shape_str(bias->shape) + " incompatible with kernel " +
                             shape_str(kernel->shape));
    }

    const int64_t p_count = ho * wo, krows = 9 * c;
    std::vector<T> out(static_cast<size_t>(b) * o * p_count, T(0));
    std::vector<T> patches(static_cast<size_t>(krows) * p_count);
    for (int64_t e = 0; e < b; ++e) {
        detail::im2col_3x3(x->value.data() + e * c * h * w, c, h, w, stride, pad, ho, wo, patches.data());
        gemm_nn(kernel->value.data(), patches.data(), out.data() + e * o * p_count, o, krows, p_count);
    }
    if (bias) {
        for (int64_t e = 0; e < b; ++e) {
            for (int64_t oc = 0; oc < o; ++oc) {
                T* plane = out.data() + (e * o + oc) * p_count;
                for (int64_t j = 0; j < p_count; ++j) plane[j] += bias->value[oc];
            }
        }
    }

    std::vector<TensorPtr<T>> parents = {x, kernel};
    if (bias) parents.push_back(bias);
    return make_op_output<T>(
        {b, o, ho, wo}, std::move(out), std::move(parents),
        [x, kernel, bias, b, c, h, w, o, ho, wo, stride, pad](Tensor<T>& self) {
            const int64_t p_count = ho * wo, krows = 9 * c;
            std::vector<T> patches(static_cast<size_t>(krows) * p_count);
            std::vector<T> dpatches;
            if (x->requires_grad) dpatches.resize(patches.size());
            for (int64_t e = 0; e < b; ++e) {
                const T* dout = self.grad.data() + e * o * p_count;
                detail::im2col_3x3(x->value.data() + e * c * h * w, c, h, w, stride, pad, ho, wo,
                                   patches.data());
                if (kernel->requires_grad) {
                    gemm_nt(dout, patches.data(), kernel->grad_data(), o, p_count, krows);
                }
                if (x->requires_grad) {
                    std::fill(dpatches.begin(), dpatches.end(), T(0));
                    gemm_tn(kernel->value.data(), dout, dpatches.data(), o, krows, p_count);
                    detail::col2im_3x3(dpatches.data(), c, h, w, stride, pad, ho, wo,
                                       x->grad_data() + e * c * h * w);
                }
                if (bias && bias->requires_grad) {
                    T* db = bias->grad_data();
                    for (int64_t oc = 0; oc < o; ++oc) {
                        const T* plane = dout + oc * p_count;
                        for (int64_t j = 0; j < p_count; ++j) db[oc] += plane[j];
                    }
                }
            }
        });
}

// Subgradient at 0 is 0.
template <typename T>
TensorPtr<T> relu(const TensorPtr<T>& x) {
    std::vector<T> out(x->value.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x->value[i] > T(0) ? x->value[i] : T(0);
    return make_op_output<T>(x->shape, std::move(out), {x}, [x](Tensor<T>& self) {
        if (!x->requires_grad) return;
        T* dx = x->grad_data();
        for (size_t i = 0; i < self.grad.size(); ++i) {
            if (x->value[i] > T(0)) dx[i] += self.grad[i];
        }
    });
}

// Same data, new shape (row-major order preserved).
template <typename T>
TensorPtr<T> reshape(const TensorPtr<T>& x, std::vector<int64_t> shape) {
    if (shape_numel(shape) != x->numel()) {
        throw DimensionError("reshape: " + shape_str(x->shape) + " to " + shape_str(shape) +
                             " changes element count");
    }
    return make_op_output<T>(std::move(shape), x->value, {x}, [x](Tensor<T>& self) {
        if (!x->requires_grad) return;
        T* dx = x->grad_data();
        for (size_t i = 0; i < self.grad.size(); ++i) dx[i] += self.grad[i];
    });
}

// Elementwise sum of equal shapes (residual connections).
template <typename T>
TensorPtr<T> add(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    if (a->shape != b->shape) {
        throw DimensionError("add: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    }
    std::vector<T> out(a->value.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + b->value[i];
    return make_op_output<T>(a->shape, std::move(out), {a, b}, [a, b](Tensor<T>& self) {
        if (a->requires_grad) {
            T* da = a->grad_data();
            for (size_t i = 0; i < self.grad.size(); ++i) da[i] += self.grad[i];
        }
        if (b->requires_grad) {
            T* db = b->grad_data();
            for (size_t i = 0; i < self.grad.size(); ++i) db[i] += self.grad[i];
        }
    });
}

// x[b x s x d] -> [b x d], mean over the sequence axis.
template <typename T>
TensorPtr<T> mean_pool(const TensorPtr<T>& x) {
    if (x->shape.size() != 3) {
        throw DimensionError("mean_pool: need [b x s x d], got " + shape_str(x->shape));
    }
    const int64_t b = x->shape[0], s = x->shape[1], d = x->shape[2];
    if (s < 1) throw DimensionError("mean_pool: empty sequence");
    std::vector<T> out(static_cast<size_t>(b) * d, T(0));
    for (int64_t e = 0; e < b; ++e) {
        T* orow = out.data() + e * d;
        for (int64_t i = 0; i < s; ++i) {
            const T* xrow = x->value.data() + (e * s + i) * d;
            for (int64_t j = 0; j < d; ++j) orow[j] += xrow[j];
        }
        const T inv = T(1) / static_cast<T>(s);
        for (int64_t j = 0; j < d; ++j) orow[j] *= inv;
    }
    return make_op_output<T>({b, d}, std::move(out), {x}, [x, b, s, d](Tensor<T>& self) {
        if (!x->requires_grad) return;
        T* dx = x->grad_data();
        const T inv = T(1) / static_cast<T>(s);
        for (int64_t e = 0; e < b; ++e) {
            const T* grow = self.grad.data() + e * d;
            for (int64_t i = 0; i < s; ++i) {
                T* drow = dx + (e * s + i) * d;
                for (int64_t j = 0; j < d; ++j) drow[j] += grow[j] * inv;
            }
        }
    });
}

// x[b x c x h x w] -> [b x c], mean over the spatial axes.
template <typename T>
TensorPtr<T> spatial_mean_pool(const TensorPtr<T>& x) {
    if (x->shape.size() != 4) {
        throw DimensionError("spatial_mean_pool: need [b x c x h x w], got " + shape_str(x->shape));
    }
    const int64_t b = x->shape[0], c = x->shape[1], hw = x->shape[2] * x->shape[3];
    std::vector<T> out(static_cast<size_t>(b) * c, T(0));
    for (int64_t e = 0; e < b; ++e) {
        for (int64_t ci = 0; ci < c; ++ci) {
            const T* plane = x->value.data() + (e * c + ci) * hw;
            T sum = T(0);
            for (int64_t j = 0; j < hw; ++j) sum += plane[j];
            out[e * c + ci] = sum / static_cast<T>(hw);
        }
    }
    return make_op_output<T>({b, c}, std::move(out), {x}, [x, b, c, hw](Tensor<T>& self) {
        if (!x->requires_grad) return;
        T* dx = x->grad_data();
        for (int64_t e = 0; e < b; ++e) {
            for (int64_t ci = 0; ci < c; ++ci) {
                const T g = self.grad[e * c + ci] / static_cast<T>(hw);
                T* plane = dx + (e * c + ci) * hw;
                for (int64_t j = 0; j < hw; ++j) plane[j] += g;
            }
        }
    });
}

// Mean over positions whose id != pad_id. x[b x s x d], ids row-major [b x s].
template <typename T>
TensorPtr<T> masked_mean_pool(const TensorPtr<T>& x, const std::vector<int32_t>& ids,
                              int32_t pad_id = 0) {
    if (x->shape.size() != 3) {
        throw DimensionError("masked_mean_pool: need [b x s x d], got " + shape_str(x->shape));
    }
    const int64_t b = x->shape[0], s = x->shape[1], d = x->shape[2];
    if (static_cast<int64_t>(ids.size()) != b * s) {
        throw DimensionError("masked_mean_pool: ids size " + std::to_string(ids.size()) +
                             " does not match " + shape_str(x->shape));
    }
    std::vector<T> inv_count(static_cast<size_t>(b));
    for (int64_t e = 0; e < b; ++e) {
        int64_t cnt = 0;
        for (int64_t i = 0; i < s; ++i) cnt += ids[e * s + i] != pad_id;
        if (cnt == 0) throw DataError("masked_mean_pool: sequence " + std::to_string(e) + " is all padding");
        inv_count[e] = T(1) / static_cast<T>(cnt);
    }
    std::vector<T> out(static_cast<size_t>(b) * d, T(0));
    for (int64_t e = 0; e < b; ++e) {
        T* orow = out.data() + e * d;
        for (int64_t i = 0; i < s; ++i) {
            if (ids[e * s + i] == pad_id) continue;
            const T* xrow = x->value.data() + (e * s + i) * d;
            for (int64_t j = 0; j < d; ++j) orow[j] += xrow[j];
        }
        for (int64_t j = 0; j < d; ++j) orow[j] *= inv_count[e];
    }
    return make_op_output<T>(
        {b, d}, std::move(out), {x}, [x, ids, pad_id, b, s, d, inv_count](Tensor<T>& self) {
            if (!x->requires_grad) return;
            T* dx = x->grad_data();
            for (int64_t e = 0; e < b; ++e) {
                const T* grow = self.grad.data() + e * d;
                for (int64_t i = 0; i < s; ++i) {
                    if (ids[e * s + i] == pad_id) continue;
                    T* drow = dx + (e * s + i) * d;
                    for (int64_t j = 0; j < d; ++j) drow[j] += grow[j] * inv_count[e];
                }
            }
        });
}

// ids[b x s] into table[V x d] -> [b x s x d].
template <typename T>
TensorPtr<T> embedding_lookup(const std::vector<int32_t>& ids, int64_t b, int64_t s,
                              const TensorPtr<T>& table) {
    if (table->shape.size() != 2) {
        throw DimensionError("embedding_lookup: table must be [V x d], got " + shape_str(table->shape));
    }
    if (static_cast<int64_t>(ids.size()) != b * s || b < 1 || s < 1) {
        throw DimensionError("embedding_lookup: ids size does not match b x s");
    }
    const int64_t v = table->shape[0], d = table->shape[1];
    for (int64_t i = 0; i < b * s; ++i) {
        if (ids[i] < 0 || ids[i] >= v) {
            throw DataError("embedding_lookup: token id " + std::to_string(ids[i]) +
                            " out of range [0, " + std::to_string(v) + ") at sequence " +
                            std::to_string(i / s) + " position " + std::to_string(i % s));
        }
    }
    std::vector<T> out(static_cast<size_t>(b) * s * d);
    for (int64_t i = 0; i < b * s; ++i) {
        const T* row = table->value.data() + static_cast<int64_t>(ids[i]) * d;
        std::copy(row, row + d, out.data() + i * d);
    }
    return make_op_output<T>({b, s, d}, std::move(out), {table}, [table, ids, b, s, d](Tensor<T>& self) {
        if (!table->requires_grad) return;
        T* dt = table->grad_data();
        for (int64_t i = 0; i < b * s; ++i) {
            const T* grow = self.grad.data() + i * d;
            T* trow = dt + static_cast<int64_t>(ids[i]) * d;
            for (int64_t j = 0; j < d; ++j) trow[j] += grow[j];
        }
    });
}

// x[b x s x d] + pos[L x d] broadcast over the batch; uses the first s rows of pos.
template <typename T>
TensorPtr<T> add_positional(const TensorPtr<T>& x, const TensorPtr<T>& pos) {
    if (x->shape.size() != 3 || pos->shape.size() != 2 || pos->shape[1] != x->shape[2] ||
        pos->shape[0] < x->shape[1]) {
        throw DimensionError("add_positional: input " + shape_str(x->shape) +
                             " incompatible with table " + shape_str(pos->shape));
    }
    const int64_t b = x->shape[0], s = x->shape[1], d = x->shape[2];
    std::vector<T> out(x->value.size());
    for (int64_t e = 0; e < b; ++e) {
        for (int64_t i = 0; i < s; ++i) {
            const T* xrow = x->value.data() + (e * s + i) * d;
            const T* prow = pos->value.data() + i * d;
            T* orow = out.data() + (e * s + i) * d;
            for (int64_t j = 0; j < d; ++j) orow[j] = xrow[j] + prow[j];
        }
    }
    return make_op_output<T>(x->shape, std::move(out), {x, pos}, [x, pos, b, s, d](Tensor<T>& self) {
        if (x->requires_grad) {
            T* dx = x->grad_data();
            for (size_t i = 0; i < self.grad.size(); ++i) dx[i] += self.grad[i];
        }
        if (pos->requires_grad) {
            T* dp = pos->grad_data();
            for (int64_t e = 0; e < b; ++e) {
                for (int64_t i = 0; i < s; ++i) {
                    const T* grow = self.grad.data() + (e * s + i) * d;
                    T* prow = dp + i * d;
                    for (int64_t j = 0; j < d; ++j) prow[j] += grow[j];
                }
            }
        }
    });
}

// Scaled dot-product attention, one head, per example:
//   A = softmax(X Wq (X Wk)^T / sqrt(d)), out = A (X Wv).
template <typename T>
TensorPtr<T> attention_single_head(const TensorPtr<T>& x, const TensorPtr<T>& wq,
                                   const TensorPtr<T>& wk, const TensorPtr<T>& wv) {
    if (x->shape.size() != 3) {
        throw DimensionError("attention: need [b x s x d], got " + shape_str(x->shape));
    }
    const int64_t b = x->shape[0], s = x->shape[1], d = x->shape[2];
    if (s < 1) throw DimensionError("attention: empty sequence");
    for (const auto& w : {wq, wk, wv}) {
        if (w->shape.size() != 2 || w->shape[0] != d || w->shape[1] != d) {
            throw DimensionError("attention: projection " + shape_str(w->shape) +
                                 " must be [d x d] with d = " + std::to_string(d));
        }
    }
    const T scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(d)));

    // Saved for backward: per-example Q, K, V [s x d] and softmax rows A [s x s].
    auto q_all = std::make_shared<std::vector<T>>(static_cast<size_t>(b) * s * d, T(0));
    auto k_all = std::make_shared<std::vector<T>>(static_cast<size_t>(b) * s * d, T(0));
    auto v_all = std::make_shared<std::vector<T>>(static_cast<size_t>(b) * s * d, T(0));
    auto a_all = std::make_shared<std::vector<T>>(static_cast<size_t>(b) * s * s, T(0));

    std::vector<T> out(static_cast<size_t>(b) * s * d, T(0));
    std::vector<T> scores(static_cast<size_t>(s) * s);
    for (int64_t e = 0; e < b; ++e) {
        const T* xe = x->value.data() + e * s * d;
        T* qe = q_all->data() + e * s * d;
        T* ke = k_all->data() + e * s * d;
        T* ve = v_all->data() + e * s * d;
        T* ae = a_all->data() + e * s * s;
        gemm_nn(xe, wq->value.data(), qe, s, d, d);
        gemm_nn(xe, wk->value.data(), ke, s, d, d);
        gemm_nn(xe, wv->value.data(), ve, s, d, d);
        std::fill(scores.begin(), scores.end(), T(0));
        gemm_nt(qe, ke, scores.data(), s, d, s);
        for (int64_t i = 0; i < s; ++i) {
            T* srow = scores.data() + i * s;
            T mx = srow[0] * scale;
            for (int64_t j = 0; j < s; ++j) {
                srow[j] *= scale;
                mx = std::max(mx, srow[j]);
            }
            T sum = T(0);
            T* arow = ae + i * s;
            for (int64_t j = 0; j < s; ++j) {
                arow[j] = std::exp(srow[j] - mx);
                sum += arow[j];
            }
            const T inv = T(1) / sum;
            for (int64_t j = 0; j < s; ++j) arow[j] *= inv;
        }
        gemm_nn(ae, ve, out.data() + e * s * d, s, s, d);
    }

    return make_op_output<T>(
        {b, s, d}, std::move(out), {x, wq, wk, wv},
        [x, wq, wk, wv, q_all, k_all, v_all, a_all, b, s, d, scale](Tensor<T>& self) {
            std::vector<T> da(static_cast<size_t>(s) * s), ds(static_cast<size_t>(s) * s);
            std::vector<T> dq(static_cast<size_t>(s) * d), dk(static_cast<size_t>(s) * d),
                dv(static_cast<size_t>(s) * d);
            for (int64_t e = 0; e < b; ++e) {
                const T* dout = self.grad.data() + e * s * d;
                const T* xe = x->value.data() + e * s * d;
                const T* qe = q_all->data() + e * s * d;
                const T* ke = k_all->data() + e * s * d;
                const T* ve = v_all->data() + e * s * d;
                const T* ae = a_all->data() + e * s * s;

                std::fill(da.begin(), da.end(), T(0));
                gemm_nt(dout, ve, da.data(), s, d, s);
                std::fill(dv.begin(), dv.end(), T(0));
                gemm_tn(ae, dout, dv.data(), s, s, d);

                // Softmax backward per row, with the 1/sqrt(d) score scale folded in.
                for (int64_t i = 0; i < s; ++i) {
                    const T* arow = ae + i * s;
                    const T* darow = da.data() + i * s;
                    T dot = T(0);
                    for (int64_t j = 0; j < s; ++j) dot += darow[j] * arow[j];
                    T* dsrow = ds.data() + i * s;
                    for (int64_t j = 0; j < s; ++j) dsrow[j] = arow[j] * (darow[j] - dot) * scale;
                }

                std::fill(dq.begin(), dq.end(), T(0));
                gemm_nn(ds.data(), ke, dq.data(), s, s, d);
                std::fill(dk.begin(), dk.end(), T(0));
                gemm_tn(ds.data(), qe, dk.data(), s, s, d);

                if (x->requires_grad) {
                    T* dx = x->grad_data() + e * s * d;
                    gemm_nt(dq.data(), wq->value.data(), dx, s, d, d);
                    gemm_nt(dk.data(), wk->value.data(), dx, s, d, d);
                    gemm_nt(dv.data(), wv->value.data(), dx, s, d, d);
                }
                if (wq->requires_grad) gemm_tn(xe, dq.data(), wq->grad_data(), s, d, d);
                if (wk->requires_grad) gemm_tn(xe, dk.data(), wk->grad_data(), s, d, d);
                if (wv->requires_grad) gemm_tn(xe, dv.data(), wv->grad_data(), s, d, d);
            }
        });
}

// Distillation loss: mean over the batch of squared L2 feature distance.
// Sums over the feature axis, divides by the batch size only.
template <typename T>
TensorPtr<T> mse(const TensorPtr<T>& pred, const TensorPtr<T>& target) {
    if (pred->shape != target->shape) {
        throw DimensionError("mse: shape mismatch " + shape_str(pred->shape) + " vs " +
                             shape_str(target->shape));
    }
    if (pred->shape.size() != 2) {
        throw DimensionError("mse: need [b x d], got " + shape_str(pred->shape));
    }
    const int64_t b = pred->shape[0];
    if (b < 1) throw DataError("mse: empty batch");

    T acc = T(0);
    for (size_t i = 0; i < pred->value.size(); ++i) {
        const T diff = pred->value[i] - target->value[i];
        acc += diff * diff;
    }
    const T val = acc / static_cast<T>(b);
    if (!std::isfinite(static_cast<double>(val))) {
        throw NumericError("mse: non-finite loss " + std::to_string(static_cast<double>(val)));
    }
    return make_op_output<T>(
        {1}, {val}, {pred, target}, [pred, target, b](Tensor<T>& self) {
            const T g = self.grad[0] * T(2) / static_cast<T>(b);
            if (pred->requires_grad) {
                T* dp = pred->grad_data();
                for (size_t i = 0; i < pred->value.size(); ++i) {
                    dp[i] += g * (pred->value[i] - target->value[i]);
                }
            }
            if (target->requires_grad) {
                T* dt = target->grad_data();
                for (size_t i = 0; i < pred->value.size(); ++i) {
                    dt[i] -= g * (pred->value[i] - target->value[i]);
                }
            }
        });
}

// sum(x * w) with a fixed weight vector; the reduction used by the gradient checker.
template <typename T>
TensorPtr<T> weighted_sum(const TensorPtr<T>& x, const std::vector<T>& weights) {
    if (weights.size() != x->value.size()) {
        throw DimensionError("weighted_sum: weight count does not match tensor size");
    }
    T acc = T(0);
    for (size_t i = 0; i < weights.size(); ++i) acc += x->value[i] * weights[i];
    return make_op_output<T>({1}, {acc}, {x}, [x, weights](Tensor<T>& self) {
        if (!x->requires_grad) return;
        T* dx = x->grad_data();
        for (size_t i = 0; i < weights.size(); ++i) dx[i] += self.grad[0] * weights[i];
    });
}

}  // namespace rnddiv
