#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lstmpf {

using Vector = std::vector<double>;

// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

    const double* row(std::size_t r) const { return a.data() + r * cols; }
    double* row(std::size_t r) { return a.data() + r * cols; }

    bool operator==(const Matrix&) const = default;
};

namespace kern {

// Worker count used by the par:: kernels and corpus-level fan-outs.
// 1 selects the serial reference path everywhere.
void set_threads(int n);
int threads();

// Serial reference kernels. Kept as the ground truth the OpenMP variants
// are tested against; also what the dispatchers run when threads() == 1.
namespace ref {

// y += W x
void matvec_add(const Matrix& w, std::span<const double> x, std::span<double> y);

// x += W^T g. Accumulates column-wise (j outer, i inner) so the parallel
// variant can split by column and stay bitwise identical.
void matvec_t_add(const Matrix& w, std::span<const double> g, std::span<double> x);

// G += g x^T
void outer_add(Matrix& g_acc, std::span<const double> g, std::span<const double> x);

} // namespace ref

// OpenMP kernels. Each output element is owned by exactly one thread and
// computed with the same per-element accumulation order as ref::, so the
// results are bitwise identical to the serial reference for any thread count.
namespace par {

void matvec_add(const Matrix& w, std::span<const double> x, std::span<double> y);
void matvec_t_add(const Matrix& w, std::span<const double> g, std::span<double> x);
void outer_add(Matrix& g_acc, std::span<const double> g, std::span<const double> x);

} // namespace par

// Dispatch on the configured thread count.
void matvec_add(const Matrix& w, std::span<const double> x, std::span<double> y);
void matvec_t_add(const Matrix& w, std::span<const double> g, std::span<double> x);
void outer_add(Matrix& g_acc, std::span<const double> g, std::span<const double> x);

} // namespace kern

} // namespace lstmpf
