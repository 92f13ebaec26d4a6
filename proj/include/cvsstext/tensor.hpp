#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cvsstext/errors.hpp"

namespace cvsstext::num {

// Dense row-major matrix of 64-bit floats. Scalars are 1x1 and row vectors
// 1xN. Value semantics with shared storage, so tensors captured by tape
// closures stay alive and gradient writes are visible to every handle.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false) {
        Tensor t;
        t.s_ = std::make_shared<Storage>();
        t.s_->rows = rows;
        t.s_->cols = cols;
        t.s_->data.assign(rows * cols, 0.0);
        t.s_->requires_grad = requires_grad;
        if (requires_grad) t.s_->grad.assign(rows * cols, 0.0);
        return t;
    }

    static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false) {
        if (values.size() != rows * cols)
            throw ShapeMismatchError("tensor init: " + std::to_string(values.size()) +
                                     " values for " + std::to_string(rows) + "x" +
                                     std::to_string(cols));
        Tensor t = zeros(rows, cols, requires_grad);
        t.s_->data = std::move(values);
        return t;
    }

    static Tensor row(std::vector<double> values, bool requires_grad = false) {
        const std::size_t n = values.size();
        return from(1, n, std::move(values), requires_grad);
    }

    static Tensor scalar(double v) { return from(1, 1, {v}); }

    bool defined() const { return static_cast<bool>(s_); }
    std::size_t rows() const { return s_->rows; }
    std::size_t cols() const { return s_->cols; }
    std::size_t size() const { return s_->data.size(); }
    std::vector<std::size_t> shape() const { return {s_->rows, s_->cols}; }

    double* data() { return s_->data.data(); }
    const double* data() const { return s_->data.data(); }
    double at(std::size_t r, std::size_t c) const { return s_->data[r * s_->cols + c]; }
    double& at(std::size_t r, std::size_t c) { return s_->data[r * s_->cols + c]; }
    double item() const {
        if (size() != 1) throw ShapeMismatchError("item() on non-scalar tensor");
        return s_->data[0];
    }

    bool requires_grad() const { return s_->requires_grad; }
    double* grad() { return s_->requires_grad ? s_->grad.data() : nullptr; }
    const double* grad() const { return s_->requires_grad ? s_->grad.data() : nullptr; }
    void zero_grad() {
        if (s_->requires_grad) s_->grad.assign(s_->data.size(), 0.0);
    }

    // identity of the underlying buffer, used as an optimizer state key
    const void* id() const { return s_.get(); }

  private:
    struct Storage {
        std::size_t rows = 0, cols = 0;
        std::vector<double> data;
        std::vector<double> grad;
        bool requires_grad = false;
    };
    std::shared_ptr<Storage> s_;
};

// C += A(mxk) * B(kxn); ikj order keeps the k-summation sequential per output
// element, so results are independent of how many rows are computed. That
// property is what makes trimmed and full-length forward passes bit-identical.
inline void gemm_acc(const double* a, std::size_t m, std::size_t k, const double* b,
                     std::size_t n, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C += A(mxk) * B(nxk)^T
inline void gemm_nt_acc(const double* a, std::size_t m, std::size_t k, const double* b,
                        std::size_t n, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double s = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
            crow[j] += s;
        }
    }
}

// C += A(kxm)^T * B(kxn)
inline void gemm_tn_acc(const double* a, std::size_t k, std::size_t m, const double* b,
                        std::size_t n, double* c) {
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double* arow = a + kk * m;
        const double* brow = b + kk * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// Reverse-mode tape. Ops append one node per recorded operation; backward
// replays them once, last to first, which is reverse topological order
// because nodes are recorded in execution order.
class Tape {
  public:
    void record(std::function<void()> backprop) { nodes_.push_back(std::move(backprop)); }

    void backward(Tensor output) {
        if (output.size() != 1) throw NonScalarOutputError();
        if (!output.requires_grad())
            throw ModelError("backward on an untracked output");
        output.grad()[0] += 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

    std::size_t node_count() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

  private:
    std::vector<std::function<void()>> nodes_;
};

namespace detail {

inline bool track(Tape* tape, std::initializer_list<const Tensor*> inputs) {
    if (!tape) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

[[noreturn]] inline void shape_fail(const std::string& op, const Tensor& a) {
    throw ShapeMismatchError(op + ": bad shape " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()));
}

[[noreturn]] inline void shape_fail2(const std::string& op, const Tensor& a,
                                     const Tensor& b) {
    throw ShapeMismatchError(op + ": incompatible shapes " + std::to_string(a.rows()) +
                             "x" + std::to_string(a.cols()) + " and " +
                             std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

}  // namespace detail

inline Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) detail::shape_fail2("matmul", a, b);
    Tensor out = Tensor::zeros(a.rows(), b.cols(), detail::track(tape, {&a, &b}));
    gemm_acc(a.data(), a.rows(), a.cols(), b.data(), b.cols(), out.data());
    if (out.requires_grad()) {
        tape->record([a = a, b = b, out = out]() mutable {
            if (a.requires_grad())
                gemm_nt_acc(out.grad(), out.rows(), out.cols(), b.data(), b.rows(),
                            a.grad());
            if (b.requires_grad())
                gemm_tn_acc(a.data(), a.rows(), a.cols(), out.grad(), out.cols(),
                            b.grad());
        });
    }
    return out;
}

// a @ b^T, with b stored row-major (n x k)
inline Tensor matmul_nt(Tape* tape, const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols()) detail::shape_fail2("matmul_nt", a, b);
    Tensor out = Tensor::zeros(a.rows(), b.rows(), detail::track(tape, {&a, &b}));
    gemm_nt_acc(a.data(), a.rows(), a.cols(), b.data(), b.rows(), out.data());
    if (out.requires_grad()) {
        tape->record([a = a, b = b, out = out]() mutable {
            if (a.requires_grad())
                gemm_acc(out.grad(), out.rows(), out.cols(), b.data(), b.cols(),
                         a.grad());
            if (b.requires_grad())
                gemm_tn_acc(out.grad(), out.rows(), out.cols(), a.data(), a.cols(),
                            b.grad());
        });
    }
    return out;
}

// elementwise add; b may also be a 1xC row vector broadcast over a's rows
inline Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
    const bool broadcast = b.rows() == 1 && a.cols() == b.cols() && a.rows() != 1;
    if (!broadcast && (a.rows() != b.rows() || a.cols() != b.cols()))
        detail::shape_fail2("add", a, b);
    Tensor out = Tensor::zeros(a.rows(), a.cols(), detail::track(tape, {&a, &b}));
    const std::size_t c = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < c; ++j)
            out.data()[i * c + j] = a.data()[i * c + j] + b.data()[broadcast ? j : i * c + j];
    if (out.requires_grad()) {
        tape->record([a = a, b = b, out = out, broadcast]() mutable {
            const std::size_t cc = a.cols();
            if (a.requires_grad())
                for (std::size_t x = 0; x < a.size(); ++x) a.grad()[x] += out.grad()[x];
            if (b.requires_grad()) {
                if (broadcast) {
                    for (std::size_t i = 0; i < a.rows(); ++i)
                        for (std::size_t j = 0; j < cc; ++j)
                            b.grad()[j] += out.grad()[i * cc + j];
                } else {
                    for (std::size_t x = 0; x < b.size(); ++x)
                        b.grad()[x] += out.grad()[x];
                }
            }
        });
    }
    return out;
}

inline Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) detail::shape_fail2("mul", a, b);
    Tensor out = Tensor::zeros(a.rows(), a.cols(), detail::track(tape, {&a, &b}));
    for (std::size_t x = 0; x < a.size(); ++x) out.data()[x] = a.data()[x] * b.data()[x];
    if (out.requires_grad()) {
        tape->record([a = a, b = b, out = out]() mutable {
            if (a.requires_grad())
                for (std::size_t x = 0; x < a.size(); ++x)
                    a.grad()[x] += out.grad()[x] * b.data()[x];
            if (b.requires_grad())
                for (std::size_t x = 0; x < b.size(); ++x)
                    b.grad()[x] += out.grad()[x] * a.data()[x];
        });
    }
    return out;
}

inline Tensor scale(Tape* tape, const Tensor& a, double k) {
    Tensor out = Tensor::zeros(a.rows(), a.cols(), detail::track(tape, {&a}));
    for (std::size_t x = 0; x < a.size(); ++x) out.data()[x] = a.data()[x] * k;
    if (out.requires_grad()) {
        tape->record([a = a, out = out, k]() mutable {
            for (std::size_t x = 0; x < a.size(); ++x) a.grad()[x] += out.grad()[x] * k;
        });
    }
    return out;
}

inline Tensor relu(Tape* tape, const Tensor& a) {
    Tensor out = Tensor::zeros(a.rows(), a.cols(), detail::track(tape, {&a}));
    for (std::size_t x = 0; x < a.size(); ++x)
        out.data()[x] = a.data()[x] > 0.0 ? a.data()[x] : 0.0;
    if (out.requires_grad()) {
        tape->record([a = a, out = out]() mutable {
            for (std::size_t x = 0; x < a.size(); ++x)
                if (a.data()[x] > 0.0) a.grad()[x] += out.grad()[x];
        });
    }
    return out;
}

// exact GELU: x * Phi(x)
inline Tensor gelu(Tape* tape, const Tensor& a) {
    Tensor out = Tensor::zeros(a.rows(), a.cols(), detail::track(tape, {&a}));
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    for (std::size_t x = 0; x < a.size(); ++x) {
        const double v = a.data()[x];
        out.data()[x] = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
    }
    if (out.requires_grad()) {
        tape->record([a = a, out = out]() mutable {
            constexpr double inv_sqrt2pi = 0.3989422804014326779;
            for (std::size_t x = 0; x < a.size(); ++x) {
                const double v = a.data()[x];
                const double phi = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
                const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
                a.grad()[x] += out.grad()[x] * (phi + v * pdf);
            }
        });
    }
    return out;
}

// row-wise softmax with max subtraction
inline Tensor softmax_rows(Tape* tape, const Tensor& a) {
    Tensor out = Tensor::zeros(a.rows(), a.cols(), detail::track(tape, {&a}));
    const std::size_t c = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* in = a.data() + i * c;
        double* o = out.data() + i * c;
        double mx = in[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (std::size_t j = 0; j < c; ++j) o[j] /= sum;
    }
    if (out.requires_grad()) {
        tape->record([a = a, out = out]() mutable {
            const std::size_t cc = a.cols();
            for (std::size_t i = 0; i < a.rows(); ++i) {
                const double* y = out.data() + i * cc;
                const double* dy = out.grad() + i * cc;
                double dot = 0.0;
                for (std::size_t j = 0; j < cc; ++j) dot += y[j] * dy[j];
                double* dx = a.grad() + i * cc;
                for (std::size_t j = 0; j < cc; ++j) dx[j] += y[j] * (dy[j] - dot);
            }
        });
    }
    return out;
}

// per-row normalization followed by an affine map with 1xC gain and bias
inline Tensor layer_norm(Tape* tape, const Tensor& x, const Tensor& gain,
                         const Tensor& bias, double eps = 1e-5) {
    if (gain.rows() != 1 || gain.cols() != x.cols() || bias.rows() != 1 ||
        bias.cols() != x.cols())
        detail::shape_fail2("layer_norm", x, gain);
    Tensor out = Tensor::zeros(x.rows(), x.cols(), detail::track(tape, {&x, &gain, &bias}));
    const std::size_t c = x.cols();
    std::vector<double> inv_std(x.rows()), means(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* in = x.data() + i * c;
        double mean = 0.0;
        for (std::size_t j = 0; j < c; ++j) mean += in[j];
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) var += (in[j] - mean) * (in[j] - mean);
        var /= static_cast<double>(c);
        const double is = 1.0 / std::sqrt(var + eps);
        means[i] = mean;
        inv_std[i] = is;
        double* o = out.data() + i * c;
        for (std::size_t j = 0; j < c; ++j)
            o[j] = (in[j] - mean) * is * gain.data()[j] + bias.data()[j];
    }
    if (out.requires_grad()) {
        tape->record([x = x, gain = gain, bias = bias, out = out, means, inv_std]() mutable {
            const std::size_t cc = x.cols();
            const double n = static_cast<double>(cc);
            for (std::size_t i = 0; i < x.rows(); ++i) {
                const double* in = x.data() + i * cc;
                const double* dy = out.grad() + i * cc;
                const double is = inv_std[i];
                const double mean = means[i];
                // dgain/dbias accumulate over rows; dx needs the projected stats
                double sum_g = 0.0, sum_gy = 0.0;
                for (std::size_t j = 0; j < cc; ++j) {
                    const double yhat = (in[j] - mean) * is;
                    const double g = dy[j] * gain.data()[j];
                    sum_g += g;
                    sum_gy += g * yhat;
                    if (gain.requires_grad()) gain.grad()[j] += dy[j] * yhat;
                    if (bias.requires_grad()) bias.grad()[j] += dy[j];
                }
                if (x.requires_grad()) {
                    double* dx = x.grad() + i * cc;
                    for (std::size_t j = 0; j < cc; ++j) {
                        const double yhat = (in[j] - mean) * is;
                        const double g = dy[j] * gain.data()[j];
                        dx[j] += is * (g - sum_g / n - yhat * sum_gy / n);
                    }
                }
            }
        });
    }
    return out;
}

// gathers rows of the table; the result is the per-position input embedding
// matrix, and its grad buffer is what saliency reads after backward
inline Tensor embedding_lookup(Tape* tape, const Tensor& table,
                               std::span<const int> ids) {
    const std::size_t c = table.cols();
    for (int id : ids)
        if (id < 0 || static_cast<std::size_t>(id) >= table.rows())
            throw ShapeMismatchError("embedding_lookup: id " + std::to_string(id) +
                                     " out of range for table with " +
                                     std::to_string(table.rows()) + " rows");
    Tensor out = Tensor::zeros(ids.size(), c, detail::track(tape, {&table}));
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < c; ++j)
            out.data()[i * c + j] = table.at(static_cast<std::size_t>(ids[i]), j);
    if (out.requires_grad()) {
        std::vector<int> idv(ids.begin(), ids.end());
        tape->record([table = table, out = out, idv]() mutable {
            const std::size_t cc = table.cols();
            for (std::size_t i = 0; i < idv.size(); ++i) {
                double* trow = table.grad() + static_cast<std::size_t>(idv[i]) * cc;
                const double* orow = out.grad() + i * cc;
                for (std::size_t j = 0; j < cc; ++j) trow[j] += orow[j];
            }
        });
    }
    return out;
}

inline Tensor concat_cols(Tape* tape, const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeMismatchError("concat_cols: no inputs");
    const std::size_t r = parts[0].rows();
    std::size_t total = 0;
    bool track = false;
    for (const Tensor& p : parts) {
        if (p.rows() != r) detail::shape_fail2("concat_cols", parts[0], p);
        total += p.cols();
        track = track || (tape && p.requires_grad());
    }
    Tensor out = Tensor::zeros(r, total, track);
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < p.cols(); ++j)
                out.data()[i * total + off + j] = p.data()[i * p.cols() + j];
        off += p.cols();
    }
    if (track) {
        tape->record([parts = parts, out = out, total]() mutable {
            std::size_t o = 0;
            for (Tensor& p : parts) {
                if (p.requires_grad())
                    for (std::size_t i = 0; i < p.rows(); ++i)
                        for (std::size_t j = 0; j < p.cols(); ++j)
                            p.grad()[i * p.cols() + j] += out.grad()[i * total + o + j];
                o += p.cols();
            }
        });
    }
    return out;
}

inline Tensor slice_cols(Tape* tape, const Tensor& a, std::size_t c0, std::size_t c1) {
    if (c0 >= c1 || c1 > a.cols()) detail::shape_fail("slice_cols", a);
    const std::size_t w = c1 - c0;
    Tensor out = Tensor::zeros(a.rows(), w, detail::track(tape, {&a}));
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < w; ++j)
            out.data()[i * w + j] = a.data()[i * a.cols() + c0 + j];
    if (out.requires_grad()) {
        tape->record([a = a, out = out, c0, w]() mutable {
            for (std::size_t i = 0; i < a.rows(); ++i)
                for (std::size_t j = 0; j < w; ++j)
                    a.grad()[i * a.cols() + c0 + j] += out.grad()[i * w + j];
        });
    }
    return out;
}

inline Tensor slice_rows(Tape* tape, const Tensor& a, std::size_t r0, std::size_t r1) {
    if (r0 >= r1 || r1 > a.rows()) detail::shape_fail("slice_rows", a);
    const std::size_t h = r1 - r0;
    Tensor out = Tensor::zeros(h, a.cols(), detail::track(tape, {&a}));
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            out.data()[i * a.cols() + j] = a.data()[(r0 + i) * a.cols() + j];
    if (out.requires_grad()) {
        tape->record([a = a, out = out, r0, h]() mutable {
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < a.cols(); ++j)
                    a.grad()[(r0 + i) * a.cols() + j] += out.grad()[i * a.cols() + j];
        });
    }
    return out;
}

// single element as a 1x1 tensor (flat index)
inline Tensor pick(Tape* tape, const Tensor& a, std::size_t index) {
    if (index >= a.size()) detail::shape_fail("pick", a);
    Tensor out = Tensor::zeros(1, 1, detail::track(tape, {&a}));
    out.data()[0] = a.data()[index];
    if (out.requires_grad()) {
        tape->record([a = a, out = out, index]() mutable { a.grad()[index] += out.grad()[0]; });
    }
    return out;
}

inline Tensor sum_all(Tape* tape, const Tensor& a) {
    Tensor out = Tensor::zeros(1, 1, detail::track(tape, {&a}));
    double s = 0.0;
    for (std::size_t x = 0; x < a.size(); ++x) s += a.data()[x];
    out.data()[0] = s;
    if (out.requires_grad()) {
        tape->record([a = a, out = out]() mutable {
            for (std::size_t x = 0; x < a.size(); ++x) a.grad()[x] += out.grad()[0];
        });
    }
    return out;
}

// fused -log softmax(logits)[target] over a 1xC logits row
inline Tensor cross_entropy(Tape* tape, const Tensor& logits, std::size_t target) {
    if (logits.rows() != 1) detail::shape_fail("cross_entropy", logits);
    if (target >= logits.cols())
        throw TargetOutOfRangeError("cross_entropy: target " + std::to_string(target) +
                                    " for " + std::to_string(logits.cols()) + " classes");
    const std::size_t c = logits.cols();
    double mx = logits.data()[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits.data()[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(logits.data()[j] - mx);
    const double logsumexp = mx + std::log(sum);
    Tensor out = Tensor::zeros(1, 1, detail::track(tape, {&logits}));
    out.data()[0] = logsumexp - logits.data()[target];
    if (out.requires_grad()) {
        tape->record([logits = logits, out = out, target, mx, sum]() mutable {
            const double d = out.grad()[0];
            for (std::size_t j = 0; j < logits.cols(); ++j) {
                const double p = std::exp(logits.data()[j] - mx) / sum;
                logits.grad()[j] += d * (p - (j == target ? 1.0 : 0.0));
            }
        });
    }
    return out;
}

inline std::vector<double> softmax_row(const double* logits, std::size_t n) {
    std::vector<double> p(n);
    double mx = logits[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, logits[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        p[j] = std::exp(logits[j] - mx);
        sum += p[j];
    }
    for (std::size_t j = 0; j < n; ++j) p[j] /= sum;
    return p;
}

}  // namespace cvsstext::num
