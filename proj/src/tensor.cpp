#include "psat/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace psat {

Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<double>> rows_init) {
    Tensor2 t;
    t.rows = rows_init.size();
    t.cols = rows_init.size() ? rows_init.begin()->size() : 0;
    t.data.reserve(t.rows * t.cols);
    for (const auto& r : rows_init) {
        if (r.size() != t.cols) throw MathError("from_rows: ragged initializer");
        t.data.insert(t.data.end(), r.begin(), r.end());
    }
    return t;
}

Tensor2 Tensor2::identity(std::size_t n) {
    Tensor2 t(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

Tensor2 Tensor2::row_vector(std::initializer_list<double> values) {
    Tensor2 t(1, values.size());
    std::copy(values.begin(), values.end(), t.data.begin());
    return t;
}

bool Tensor2::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

void Tensor2::fill(double v) { std::fill(data.begin(), data.end(), v); }

std::string Tensor2::shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
    if (a.cols != b.rows) {
        throw MathError("matmul: shape mismatch " + a.shape_str() + " x " + b.shape_str());
    }
    Tensor2 c(a.rows, b.cols, 0.0);
    // i-k-j order keeps the inner loop contiguous in both b and c.
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.data.data() + i * a.cols;
        double* crow = c.data.data() + i * c.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
    if (a.cols != b.cols) {
        throw MathError("matmul_nt: shape mismatch " + a.shape_str() + " x " + b.shape_str() + "^T");
    }
    Tensor2 c(a.rows, b.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.rows; ++j) {
            c.at(i, j) = dot(a.row(i), b.row(j));
        }
    }
    return c;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
    if (a.rows != b.rows) {
        throw MathError("matmul_tn: shape mismatch " + a.shape_str() + "^T x " + b.shape_str());
    }
    Tensor2 c(a.cols, b.cols, 0.0);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* arow = a.data.data() + k * a.cols;
        const double* brow = b.data.data() + k * b.cols;
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c.data.data() + i * c.cols;
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor2 transpose(const Tensor2& a) {
    Tensor2 t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

Tensor2 softmax_rows(const Tensor2& x) {
    if (x.size() == 0) throw MathError("softmax_rows: empty input");
    Tensor2 y(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        auto in = x.row(i);
        auto out = y.row(i);
        double mx = *std::max_element(in.begin(), in.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            out[j] = std::exp(in[j] - mx);
            sum += out[j];
        }
        for (std::size_t j = 0; j < x.cols; ++j) out[j] /= sum;
    }
    return y;
}

Tensor2 layer_norm(const Tensor2& x, std::span<const double> gain,
                   std::span<const double> bias, double epsilon) {
    if (gain.size() != x.cols || bias.size() != x.cols) {
        throw MathError("layer_norm: gain/bias length " + std::to_string(gain.size()) + "/" +
                        std::to_string(bias.size()) + " does not match cols " +
                        std::to_string(x.cols));
    }
    Tensor2 y(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        auto in = x.row(i);
        auto out = y.row(i);
        double mean = 0.0;
        for (double v : in) mean += v;
        mean /= static_cast<double>(x.cols);
        double var = 0.0;
        for (double v : in) var += (v - mean) * (v - mean);
        var /= static_cast<double>(x.cols);
        double inv = 1.0 / std::sqrt(var + epsilon);
        for (std::size_t j = 0; j < x.cols; ++j) {
            out[j] = (in[j] - mean) * inv * gain[j] + bias[j];
        }
    }
    return y;
}

void axpy(double alpha, const Tensor2& x, Tensor2& y) {
    if (!x.same_shape(y)) throw MathError("axpy: shape mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y.data[i] += alpha * x.data[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const Tensor2& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return std::sqrt(s);
}

}  // namespace psat
