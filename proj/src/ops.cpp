#include "inducer/ops.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "inducer/tape.hpp"

namespace inducer {

namespace {

using Forward = std::function<void(std::span<double>)>;

bool tracked(std::initializer_list<const Tensor*> inputs)
{
    if (Tape::active() == nullptr) return false;
    return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

bool tracked(std::span<const Tensor> inputs)
{
    if (Tape::active() == nullptr) return false;
    return std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
}

void record(std::string op, std::vector<Tensor> inputs, Tensor out, Forward fwd, std::function<void()> bwd)
{
    out.set_requires_grad(true);
    Tape::active()->push({std::move(op), std::move(inputs), std::move(out), std::move(fwd), std::move(bwd)});
}

// Gradient buffer of an input, or nullptr when it does not take part.
double* grad_of(const Tensor& t)
{
    return t.requires_grad() ? Tensor(t).mutable_grad().data() : nullptr;
}

void require_matrix(const Tensor& a, const char* op)
{
    if (a.rank() != 2) {
        throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_to_string(a.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op)
{
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
    }
}

// c[m×n] (+)= a[m×k]·b[k×n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n)
{
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// c[m×n] (+)= a[m×k]·b[n×k]ᵀ
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n)
{
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            c[i * n + j] += acc;
        }
    }
}

// c[m×n] (+)= a[k×m]ᵀ·b[k×n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n)
{
    for (std::size_t p = 0; p < k; ++p) {
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = a[p * m + i];
            if (av == 0.0) continue;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <class Fn, class Deriv>
Tensor unary(const char* name, const Tensor& a, Fn fn, Deriv deriv)
{
    Tensor out(a.shape());
    Forward fwd = [a, fn](std::span<double> y) {
        const auto x = a.data();
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = fn(x[i]);
    };
    fwd(out.mutable_data());
    if (tracked({&a})) {
        record(name, {a}, out, fwd, [a, out, deriv]() mutable {
            const auto x = a.data();
            const auto gy = out.grad();
            double* ga = grad_of(a);
            for (std::size_t i = 0; i < x.size(); ++i) ga[i] += gy[i] * deriv(x[i]);
        });
    }
    return out;
}

}  // namespace

Mask::Mask(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), allowed_(rows * cols, 1) {}

Mask Mask::causal(std::size_t n, std::size_t leading)
{
    Mask m(n, n + leading);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) m.set(i, leading + j, false);
    }
    return m;
}

Tensor matmul(const Tensor& a, const Tensor& b)
{
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
    }
    Tensor out(Shape{m, n});
    Forward fwd = [a, b, m, k, n](std::span<double> y) {
        std::fill(y.begin(), y.end(), 0.0);
        gemm_nn(a.data().data(), b.data().data(), y.data(), m, k, n);
    };
    fwd(out.mutable_data());
    if (tracked({&a, &b})) {
        record("matmul", {a, b}, out, fwd, [a, b, out, m, k, n]() mutable {
            const double* gy = out.grad().data();
            if (double* ga = grad_of(a)) gemm_nt(gy, b.data().data(), ga, m, n, k);
            if (double* gb = grad_of(b)) gemm_tn(a.data().data(), gy, gb, k, m, n);
        });
    }
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b)
{
    require_matrix(a, "matmul_nt");
    require_matrix(b, "matmul_nt");
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    if (b.cols() != k) {
        throw ShapeError("matmul_nt: inner dimensions differ, " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()) + "^T");
    }
    Tensor out(Shape{m, n});
    Forward fwd = [a, b, m, k, n](std::span<double> y) {
        std::fill(y.begin(), y.end(), 0.0);
        gemm_nt(a.data().data(), b.data().data(), y.data(), m, k, n);
    };
    fwd(out.mutable_data());
    if (tracked({&a, &b})) {
        record("matmul_nt", {a, b}, out, fwd, [a, b, out, m, k, n]() mutable {
            const double* gy = out.grad().data();
            if (double* ga = grad_of(a)) gemm_nn(gy, b.data().data(), ga, m, n, k);
            if (double* gb = grad_of(b)) gemm_tn(gy, a.data().data(), gb, n, m, k);
        });
    }
    return out;
}

Tensor transpose(const Tensor& a)
{
    require_matrix(a, "transpose");
    const std::size_t r = a.rows(), c = a.cols();
    Tensor out(Shape{c, r});
    Forward fwd = [a, r, c](std::span<double> y) {
        const auto x = a.data();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) y[j * r + i] = x[i * c + j];
    };
    fwd(out.mutable_data());
    if (tracked({&a})) {
        record("transpose", {a}, out, fwd, [a, out, r, c]() mutable {
            const auto gy = out.grad();
            double* ga = grad_of(a);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += gy[j * r + i];
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "add");
    Tensor out(a.shape());
    Forward fwd = [a, b](std::span<double> y) {
        const auto x = a.data(), z = b.data();
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] + z[i];
    };
    fwd(out.mutable_data());
    if (tracked({&a, &b})) {
        record("add", {a, b}, out, fwd, [a, b, out]() mutable {
            const auto gy = out.grad();
            if (double* ga = grad_of(a))
                for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
            if (double* gb = grad_of(b))
                for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i];
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "sub");
    Tensor out(a.shape());
    Forward fwd = [a, b](std::span<double> y) {
        const auto x = a.data(), z = b.data();
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] - z[i];
    };
    fwd(out.mutable_data());
    if (tracked({&a, &b})) {
        record("sub", {a, b}, out, fwd, [a, b, out]() mutable {
            const auto gy = out.grad();
            if (double* ga = grad_of(a))
                for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
            if (double* gb = grad_of(b))
                for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "mul");
    Tensor out(a.shape());
    Forward fwd = [a, b](std::span<double> y) {
        const auto x = a.data(), z = b.data();
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * z[i];
    };
    fwd(out.mutable_data());
    if (tracked({&a, &b})) {
        record("mul", {a, b}, out, fwd, [a, b, out]() mutable {
            const auto gy = out.grad();
            const auto x = a.data(), z = b.data();
            if (double* ga = grad_of(a))
                for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * z[i];
            if (double* gb = grad_of(b))
                for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * x[i];
        });
    }
    return out;
}

Tensor scale(const Tensor& a, double s)
{
    return unary(
        "scale", a, [s](double x) { return s * x; }, [s](double) { return s; });
}

Tensor add_scalar(const Tensor& a, double c)
{
    return unary(
        "add_scalar", a, [c](double x) { return x + c; }, [](double) { return 1.0; });
}

Tensor add_row(const Tensor& a, const Tensor& bias)
{
    require_matrix(a, "add_row");
    const std::size_t r = a.rows(), c = a.cols();
    if (bias.rank() != 1 || bias.numel() != c) {
        throw ShapeError("add_row: bias " + shape_to_string(bias.shape()) + " does not match " +
                         shape_to_string(a.shape()));
    }
    Tensor out(a.shape());
    Forward fwd = [a, bias, r, c](std::span<double> y) {
        const auto x = a.data(), b = bias.data();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) y[i * c + j] = x[i * c + j] + b[j];
    };
    fwd(out.mutable_data());
    if (tracked({&a, &bias})) {
        record("add_row", {a, bias}, out, fwd, [a, bias, out, r, c]() mutable {
            const auto gy = out.grad();
            if (double* ga = grad_of(a))
                for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
            if (double* gb = grad_of(bias))
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) gb[j] += gy[i * c + j];
        });
    }
    return out;
}

Tensor row_scale(const Tensor& a, const Tensor& s)
{
    require_matrix(a, "row_scale");
    const std::size_t r = a.rows(), c = a.cols();
    if (s.numel() != r) {
        throw ShapeError("row_scale: " + shape_to_string(s.shape()) + " scale for " + shape_to_string(a.shape()));
    }
    Tensor out(a.shape());
    Forward fwd = [a, s, r, c](std::span<double> y) {
        const auto x = a.data(), w = s.data();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) y[i * c + j] = w[i] * x[i * c + j];
    };
    fwd(out.mutable_data());
    if (tracked({&a, &s})) {
        record("row_scale", {a, s}, out, fwd, [a, s, out, r, c]() mutable {
            const auto gy = out.grad();
            const auto x = a.data(), w = s.data();
            double* ga = grad_of(a);
            double* gs = grad_of(s);
            for (std::size_t i = 0; i < r; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < c; ++j) {
                    if (ga) ga[i * c + j] += w[i] * gy[i * c + j];
                    acc += gy[i * c + j] * x[i * c + j];
                }
                if (gs) gs[i] += acc;
            }
        });
    }
    return out;
}

Tensor row_dot(const Tensor& a, const Tensor& b)
{
    require_matrix(a, "row_dot");
    require_same_shape(a, b, "row_dot");
    const std::size_t r = a.rows(), c = a.cols();
    Tensor out(Shape{r});
    Forward fwd = [a, b, r, c](std::span<double> y) {
        const auto x = a.data(), z = b.data();
        for (std::size_t i = 0; i < r; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < c; ++j) acc += x[i * c + j] * z[i * c + j];
            y[i] = acc;
        }
    };
    fwd(out.mutable_data());
    if (tracked({&a, &b})) {
        record("row_dot", {a, b}, out, fwd, [a, b, out, r, c]() mutable {
            const auto gy = out.grad();
            const auto x = a.data(), z = b.data();
            double* ga = grad_of(a);
            double* gb = grad_of(b);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) {
                    if (ga) ga[i * c + j] += gy[i] * z[i * c + j];
                    if (gb) gb[i * c + j] += gy[i] * x[i * c + j];
                }
        });
    }
    return out;
}

Tensor row_sum(const Tensor& a)
{
    require_matrix(a, "row_sum");
    const std::size_t r = a.rows(), c = a.cols();
    Tensor out(Shape{r});
    Forward fwd = [a, r, c](std::span<double> y) {
        const auto x = a.data();
        for (std::size_t i = 0; i < r; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < c; ++j) acc += x[i * c + j];
            y[i] = acc;
        }
    };
    fwd(out.mutable_data());
    if (tracked({&a})) {
        record("row_sum", {a}, out, fwd, [a, out, r, c]() mutable {
            const auto gy = out.grad();
            double* ga = grad_of(a);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += gy[i];
        });
    }
    return out;
}

Tensor relu(const Tensor& a)
{
    return unary(
        "relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a)
{
    static constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
    static constexpr double c = 0.044715;
    return unary(
        "gelu", a,
        [](double x) { return 0.5 * x * (1.0 + std::tanh(k * (x + c * x * x * x))); },
        [](double x) {
            const double t = std::tanh(k * (x + c * x * x * x));
            return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * c * x * x);
        });
}

Tensor apply_mask(const Tensor& logits, const Mask& mask)
{
    require_matrix(logits, "apply_mask");
    const std::size_t r = logits.rows(), c = logits.cols();
    if (mask.rows() != r || mask.cols() != c) {
        throw ShapeError("apply_mask: mask " + std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()) +
                         " for logits " + shape_to_string(logits.shape()));
    }
    Tensor out(logits.shape());
    Forward fwd = [logits, mask, r, c](std::span<double> y) {
        const auto x = logits.data();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) y[i * c + j] = mask.allowed(i, j) ? x[i * c + j] : kMaskedLogit;
    };
    fwd(out.mutable_data());
    if (tracked({&logits})) {
        record("apply_mask", {logits}, out, fwd, [logits, mask, out, r, c]() mutable {
            const auto gy = out.grad();
            double* ga = grad_of(logits);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j)
                    if (mask.allowed(i, j)) ga[i * c + j] += gy[i * c + j];
        });
    }
    return out;
}

Tensor softmax_rows(const Tensor& x)
{
    if (x.rank() != 2 && x.rank() != 1) throw ShapeError("softmax_rows: expected a matrix");
    const std::size_t r = x.rows(), c = x.cols();
    Tensor out(x.shape());
    Forward fwd = [x, r, c](std::span<double> y) {
        const auto v = x.data();
        for (std::size_t i = 0; i < r; ++i) {
            const double* row = v.data() + i * c;
            double* o = y.data() + i * c;
            const double mx = *std::max_element(row, row + c);
            double total = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                o[j] = std::exp(row[j] - mx);
                total += o[j];
            }
            for (std::size_t j = 0; j < c; ++j) o[j] /= total;
        }
    };
    fwd(out.mutable_data());
    if (tracked({&x})) {
        record("softmax_rows", {x}, out, fwd, [x, out, r, c]() mutable {
            const auto gy = out.grad();
            const auto y = out.data();
            double* gx = grad_of(x);
            for (std::size_t i = 0; i < r; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < c; ++j) dot += gy[i * c + j] * y[i * c + j];
                for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += y[i * c + j] * (gy[i * c + j] - dot);
            }
        });
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps)
{
    require_matrix(x, "layer_norm");
    const std::size_t r = x.rows(), d = x.cols();
    if (gain.numel() != d || bias.numel() != d) {
        throw ShapeError("layer_norm: gain/bias " + shape_to_string(gain.shape()) + "/" +
                         shape_to_string(bias.shape()) + " for input " + shape_to_string(x.shape()));
    }
    // Normalised rows and inverse std, shared by forward and backward.
    auto normalise = [x, r, d, eps](std::vector<double>& xhat, std::vector<double>& inv) {
        const auto v = x.data();
        xhat.resize(r * d);
        inv.resize(r);
        for (std::size_t i = 0; i < r; ++i) {
            double mean = 0.0;
            for (std::size_t j = 0; j < d; ++j) mean += v[i * d + j];
            mean /= static_cast<double>(d);
            double var = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double z = v[i * d + j] - mean;
                var += z * z;
            }
            var /= static_cast<double>(d);
            inv[i] = 1.0 / std::sqrt(var + eps);
            for (std::size_t j = 0; j < d; ++j) xhat[i * d + j] = (v[i * d + j] - mean) * inv[i];
        }
    };
    Tensor out(x.shape());
    Forward fwd = [normalise, gain, bias, r, d](std::span<double> y) {
        std::vector<double> xhat, inv;
        normalise(xhat, inv);
        const auto g = gain.data(), b = bias.data();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < d; ++j) y[i * d + j] = xhat[i * d + j] * g[j] + b[j];
    };
    fwd(out.mutable_data());
    if (tracked({&x, &gain, &bias})) {
        record("layer_norm", {x, gain, bias}, out, fwd, [normalise, x, gain, bias, out, r, d]() mutable {
            std::vector<double> xhat, inv;
            normalise(xhat, inv);
            const auto gy = out.grad();
            const auto g = gain.data();
            double* gx = grad_of(x);
            double* gg = grad_of(gain);
            double* gb = grad_of(bias);
            std::vector<double> dxhat(d);
            for (std::size_t i = 0; i < r; ++i) {
                double sum_d = 0.0, sum_dx = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double dy = gy[i * d + j];
                    if (gg) gg[j] += dy * xhat[i * d + j];
                    if (gb) gb[j] += dy;
                    dxhat[j] = dy * g[j];
                    sum_d += dxhat[j];
                    sum_dx += dxhat[j] * xhat[i * d + j];
                }
                if (!gx) continue;
                const double n = static_cast<double>(d);
                for (std::size_t j = 0; j < d; ++j) {
                    gx[i * d + j] += inv[i] / n * (n * dxhat[j] - sum_d - xhat[i * d + j] * sum_dx);
                }
            }
        });
    }
    return out;
}

Tensor cross_entropy_loss(const Tensor& logits, std::span<const int> targets)
{
    const std::vector<std::uint8_t> all(targets.size(), 1);
    return cross_entropy_loss(logits, targets, all);
}

Tensor cross_entropy_loss(const Tensor& logits, std::span<const int> targets, std::span<const std::uint8_t> mask)
{
    require_matrix(logits, "cross_entropy_loss");
    const std::size_t r = logits.rows(), v = logits.cols();
    if (targets.size() != r || mask.size() != r) {
        throw ShapeError("cross_entropy_loss: " + std::to_string(targets.size()) + " targets for logits " +
                         shape_to_string(logits.shape()));
    }
    std::size_t count = 0;
    for (std::size_t i = 0; i < r; ++i) {
        if (!mask[i]) continue;
        if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= v) {
            throw IndexError("cross_entropy_loss: target " + std::to_string(targets[i]) + " at row " +
                             std::to_string(i) + " outside [0, " + std::to_string(v) + ")");
        }
        ++count;
    }
    if (count == 0) throw ContractError("cross_entropy_loss: no rows selected by the mask");

    std::vector<int> tgt(targets.begin(), targets.end());
    std::vector<std::uint8_t> sel(mask.begin(), mask.end());
    const double inv_count = 1.0 / static_cast<double>(count);
    Tensor out(Shape{1});
    Forward fwd = [logits, tgt, sel, r, v, inv_count](std::span<double> y) {
        const auto x = logits.data();
        double total = 0.0;
        for (std::size_t i = 0; i < r; ++i) {
            if (!sel[i]) continue;
            const double* row = x.data() + i * v;
            const double mx = *std::max_element(row, row + v);
            double s = 0.0;
            for (std::size_t j = 0; j < v; ++j) s += std::exp(row[j] - mx);
            total += mx + std::log(s) - row[tgt[i]];
        }
        y[0] = total * inv_count;
    };
    fwd(out.mutable_data());
    if (tracked({&logits})) {
        record("cross_entropy", {logits}, out, fwd, [logits, tgt, sel, out, r, v, inv_count]() mutable {
            const double g = out.grad()[0] * inv_count;
            const auto x = logits.data();
            double* gx = grad_of(logits);
            for (std::size_t i = 0; i < r; ++i) {
                if (!sel[i]) continue;
                const double* row = x.data() + i * v;
                const double mx = *std::max_element(row, row + v);
                double s = 0.0;
                for (std::size_t j = 0; j < v; ++j) s += std::exp(row[j] - mx);
                for (std::size_t j = 0; j < v; ++j) gx[i * v + j] += g * std::exp(row[j] - mx) / s;
                gx[i * v + tgt[i]] -= g;
            }
        });
    }
    return out;
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t width)
{
    require_matrix(a, "slice_cols");
    const std::size_t r = a.rows(), c = a.cols();
    if (width == 0 || begin + width > c) {
        throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + width) +
                         ") outside " + shape_to_string(a.shape()));
    }
    Tensor out(Shape{r, width});
    Forward fwd = [a, r, c, begin, width](std::span<double> y) {
        const auto x = a.data();
        for (std::size_t i = 0; i < r; ++i)
            std::copy_n(x.data() + i * c + begin, width, y.data() + i * width);
    };
    fwd(out.mutable_data());
    if (tracked({&a})) {
        record("slice_cols", {a}, out, fwd, [a, out, r, c, begin, width]() mutable {
            const auto gy = out.grad();
            double* ga = grad_of(a);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < width; ++j) ga[i * c + begin + j] += gy[i * width + j];
        });
    }
    return out;
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count)
{
    require_matrix(a, "slice_rows");
    const std::size_t r = a.rows(), c = a.cols();
    if (count == 0 || begin + count > r) {
        throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") outside " + shape_to_string(a.shape()));
    }
    Tensor out(Shape{count, c});
    Forward fwd = [a, c, begin](std::span<double> y) {
        std::copy_n(a.data().data() + begin * c, y.size(), y.data());
    };
    fwd(out.mutable_data());
    if (tracked({&a})) {
        record("slice_rows", {a}, out, fwd, [a, out, c, begin]() mutable {
            const auto gy = out.grad();
            double* ga = grad_of(a) + begin * c;
            for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
        });
    }
    return out;
}

Tensor concat_cols(std::span<const Tensor> parts)
{
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t r = parts[0].rows();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        require_matrix(p, "concat_cols");
        if (p.rows() != r) throw ShapeError("concat_cols: row count mismatch " + shape_to_string(p.shape()));
        widths.push_back(p.cols());
        total += p.cols();
    }
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    Tensor out(Shape{r, total});
    Forward fwd = [inputs, widths, r, total](std::span<double> y) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < inputs.size(); ++k) {
            const auto x = inputs[k].data();
            for (std::size_t i = 0; i < r; ++i)
                std::copy_n(x.data() + i * widths[k], widths[k], y.data() + i * total + off);
            off += widths[k];
        }
    };
    fwd(out.mutable_data());
    if (tracked(parts)) {
        record("concat_cols", inputs, out, fwd, [inputs, widths, out, r, total]() mutable {
            const auto gy = out.grad();
            std::size_t off = 0;
            for (std::size_t k = 0; k < inputs.size(); ++k) {
                if (double* g = grad_of(inputs[k])) {
                    for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < widths[k]; ++j) g[i * widths[k] + j] += gy[i * total + off + j];
                }
                off += widths[k];
            }
        });
    }
    return out;
}

Tensor concat_rows(std::span<const Tensor> parts)
{
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const std::size_t c = parts[0].cols();
    std::size_t total = 0;
    for (const auto& p : parts) {
        require_matrix(p, "concat_rows");
        if (p.cols() != c) throw ShapeError("concat_rows: column count mismatch " + shape_to_string(p.shape()));
        total += p.rows();
    }
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    Tensor out(Shape{total, c});
    Forward fwd = [inputs](std::span<double> y) {
        std::size_t off = 0;
        for (const auto& p : inputs) {
            std::copy(p.data().begin(), p.data().end(), y.begin() + static_cast<std::ptrdiff_t>(off));
            off += p.numel();
        }
    };
    fwd(out.mutable_data());
    if (tracked(parts)) {
        record("concat_rows", inputs, out, fwd, [inputs, out]() mutable {
            const auto gy = out.grad();
            std::size_t off = 0;
            for (auto& p : inputs) {
                if (double* g = grad_of(p))
                    for (std::size_t i = 0; i < p.numel(); ++i) g[i] += gy[off + i];
                off += p.numel();
            }
        });
    }
    return out;
}

Tensor reshape(const Tensor& a, Shape shape)
{
    if (shape_numel(shape) != a.numel()) {
        throw ShapeError("reshape: cannot view " + shape_to_string(a.shape()) + " as " + shape_to_string(shape));
    }
    Tensor out(std::move(shape));
    Forward fwd = [a](std::span<double> y) { std::copy(a.data().begin(), a.data().end(), y.begin()); };
    fwd(out.mutable_data());
    if (tracked({&a})) {
        record("reshape", {a}, out, fwd, [a, out]() mutable {
            const auto gy = out.grad();
            double* ga = grad_of(a);
            for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
        });
    }
    return out;
}

Tensor embedding(const Tensor& table, std::span<const int> ids)
{
    require_matrix(table, "embedding");
    const std::size_t rows = table.rows(), d = table.cols();
    if (ids.empty()) throw ShapeError("embedding: empty id list");
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= rows) {
            throw IndexError("embedding: id " + std::to_string(id) + " outside [0, " + std::to_string(rows) + ")");
        }
    }
    std::vector<int> idx(ids.begin(), ids.end());
    Tensor out(Shape{idx.size(), d});
    Forward fwd = [table, idx, d](std::span<double> y) {
        const auto x = table.data();
        for (std::size_t i = 0; i < idx.size(); ++i)
            std::copy_n(x.data() + static_cast<std::size_t>(idx[i]) * d, d, y.data() + i * d);
    };
    fwd(out.mutable_data());
    if (tracked({&table})) {
        record("embedding", {table}, out, fwd, [table, idx, out, d]() mutable {
            const auto gy = out.grad();
            double* g = grad_of(table);
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < d; ++j) g[static_cast<std::size_t>(idx[i]) * d + j] += gy[i * d + j];
        });
    }
    return out;
}

Tensor sum(const Tensor& a)
{
    Tensor out(Shape{1});
    Forward fwd = [a](std::span<double> y) {
        double acc = 0.0;
        for (double v : a.data()) acc += v;
        y[0] = acc;
    };
    fwd(out.mutable_data());
    if (tracked({&a})) {
        record("sum", {a}, out, fwd, [a, out]() mutable {
            const double g = out.grad()[0];
            double* ga = grad_of(a);
            for (std::size_t i = 0; i < a.numel(); ++i) ga[i] += g;
        });
    }
    return out;
}

}  // namespace inducer
