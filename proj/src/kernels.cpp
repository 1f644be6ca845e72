#include "lstmpf/kernels.hpp"

#include <algorithm>
#include <atomic>

namespace lstmpf::kern {

namespace {
std::atomic<int> g_threads{1};
}

void set_threads(int n) { g_threads.store(std::max(1, n)); }
int threads() { return g_threads.load(); }

namespace ref {

void matvec_add(const Matrix& w, std::span<const double> x, std::span<double> y) {
    for (std::size_t r = 0; r < w.rows; ++r) {
        const double* wr = w.row(r);
        double s = 0.0;
        for (std::size_t c = 0; c < w.cols; ++c) {
            s += wr[c] * x[c];
        }
        y[r] += s;
    }
}

void matvec_t_add(const Matrix& w, std::span<const double> g, std::span<double> x) {
    for (std::size_t c = 0; c < w.cols; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < w.rows; ++r) {
            s += w.a[r * w.cols + c] * g[r];
        }
        x[c] += s;
    }
}

void outer_add(Matrix& g_acc, std::span<const double> g, std::span<const double> x) {
    for (std::size_t r = 0; r < g_acc.rows; ++r) {
        double* gr = g_acc.row(r);
        const double gv = g[r];
        for (std::size_t c = 0; c < g_acc.cols; ++c) {
            gr[c] += gv * x[c];
        }
    }
}

} // namespace ref

namespace par {

void matvec_add(const Matrix& w, std::span<const double> x, std::span<double> y) {
    const int nt = threads();
    const long rows = static_cast<long>(w.rows);
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (long r = 0; r < rows; ++r) {
        const double* wr = w.row(static_cast<std::size_t>(r));
        double s = 0.0;
        for (std::size_t c = 0; c < w.cols; ++c) {
            s += wr[c] * x[c];
        }
        y[static_cast<std::size_t>(r)] += s;
    }
}

void matvec_t_add(const Matrix& w, std::span<const double> g, std::span<double> x) {
    const int nt = threads();
    const long cols = static_cast<long>(w.cols);
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (long c = 0; c < cols; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < w.rows; ++r) {
            s += w.a[r * w.cols + static_cast<std::size_t>(c)] * g[r];
        }
        x[static_cast<std::size_t>(c)] += s;
    }
}

void outer_add(Matrix& g_acc, std::span<const double> g, std::span<const double> x) {
    const int nt = threads();
    const long rows = static_cast<long>(g_acc.rows);
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (long r = 0; r < rows; ++r) {
        double* gr = g_acc.row(static_cast<std::size_t>(r));
        const double gv = g[static_cast<std::size_t>(r)];
        for (std::size_t c = 0; c < g_acc.cols; ++c) {
            gr[c] += gv * x[c];
        }
    }
}

} // namespace par

void matvec_add(const Matrix& w, std::span<const double> x, std::span<double> y) {
    if (threads() > 1) {
        par::matvec_add(w, x, y);
    } else {
        ref::matvec_add(w, x, y);
    }
}

void matvec_t_add(const Matrix& w, std::span<const double> g, std::span<double> x) {
    if (threads() > 1) {
        par::matvec_t_add(w, g, x);
    } else {
        ref::matvec_t_add(w, g, x);
    }
}

void outer_add(Matrix& g_acc, std::span<const double> g, std::span<const double> x) {
    if (threads() > 1) {
        par::outer_add(g_acc, g, x);
    } else {
        ref::outer_add(g_acc, g, x);
    }
}

} // namespace lstmpf::kern
