#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace psat {

// Dense row-major 2-D matrix of doubles. The only tensor shape in the
// project; vectors are 1xN or Nx1 as context requires.
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // rows * cols, row-major

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> rows_init);
    static Tensor2 identity(std::size_t n);
    static Tensor2 row_vector(std::initializer_list<double> values);

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
    bool all_finite() const;
    void fill(double v);

    std::string shape_str() const;
};

// Value-level arithmetic (the differentiable versions live in autodiff.hpp).
Tensor2 matmul(const Tensor2& a, const Tensor2& b);
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);  // a * b^T
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);  // a^T * b
Tensor2 transpose(const Tensor2& a);
Tensor2 softmax_rows(const Tensor2& x);
Tensor2 layer_norm(const Tensor2& x, std::span<const double> gain,
                   std::span<const double> bias, double epsilon);

void axpy(double alpha, const Tensor2& x, Tensor2& y);  // y += alpha * x

double dot(std::span<const double> a, std::span<const double> b);
double norm2(const Tensor2& a);

// Thrown by shape or domain violations in core math.
class MathError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace psat
