#include "gcf/numerics/kernels.hpp"

#include <omp.h>

#include <algorithm>

namespace gcf::num::kernels {

namespace {

// Below this many multiply-adds the team start-up costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 15;

int g_threads = 1;

inline double row_dot(const double* a_row, const double* b, std::size_t k, std::size_t n, std::size_t j) {
  double acc = 0.0;
  for (std::size_t p = 0; p < k; ++p) acc += a_row[p] * b[p * n + j];
  return acc;
}

}  // namespace

void set_threads(int n) {
  g_threads = n > 0 ? n : omp_get_max_threads();
  omp_set_num_threads(g_threads);
}

int threads() { return g_threads; }

void matmul_serial(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
                   bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = row_dot(a + i * k, b, k, n, j);
      c[i * n + j] = accumulate ? c[i * n + j] + v : v;
    }
  }
}

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
            bool accumulate) {
  const bool wide = m > 1 && m * k * n >= kParallelWork && g_threads > 1;
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (wide)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double v = row_dot(a + r * k, b, k, n, j);
      c[r * n + j] = accumulate ? c[r * n + j] + v : v;
    }
  }
}

void matmul_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ar = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* br = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
      c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
    }
  }
}

void matmul_at(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
    }
  }
}

void pairwise_sq_dist_serial(const double* points, const double* centers, double* out, std::size_t m,
                             std::size_t k, std::size_t d) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = points[i * d + j] - centers[c * d + j];
        acc += diff * diff;
      }
      out[i * k + c] = acc;
    }
  }
}

void pairwise_sq_dist(const double* points, const double* centers, double* out, std::size_t m, std::size_t k,
                      std::size_t d) {
  const bool wide = m * k * d >= kParallelWork && g_threads > 1;
  const auto n = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (wide)
  for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t c = 0; c < k; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = points[i * d + j] - centers[c * d + j];
        acc += diff * diff;
      }
      out[i * k + c] = acc;
    }
  }
}

}  // namespace gcf::num::kernels
