#pragma once

#include <cstddef>

// Dense inner loops. Each kernel has an OpenMP version and a serial
// reference; both accumulate every output element in the same order, so
// their results are bit-identical for any thread count.
namespace gcf::num::kernels {

// Caps the OpenMP team size used by the parallel kernels (and by scene-level
// loops elsewhere). n <= 0 restores the runtime default.
void set_threads(int n);
int threads();

// C[m x n] (+)= A[m x k] * B[k x n], all row-major.
void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
            bool accumulate);
void matmul_serial(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
                   bool accumulate);

// C[m x n] (+)= A[m x k] * B^T where B is stored [n x k].
void matmul_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate);

// C[m x n] (+)= A^T * B where A is stored [k x m] and B is [k x n].
void matmul_at(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate);

// Squared Euclidean distance from each of `m` points to each of `k` centers
// in dimension `d`; out is [m x k].
void pairwise_sq_dist(const double* points, const double* centers, double* out, std::size_t m, std::size_t k,
                      std::size_t d);
void pairwise_sq_dist_serial(const double* points, const double* centers, double* out, std::size_t m,
                             std::size_t k, std::size_t d);

}  // namespace gcf::num::kernels
