#include "ccp/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#define CCP_AVX2 __attribute__((target("avx2,fma")))

namespace ccp::kernels {

namespace {

CCP_AVX2 inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

CCP_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double sum = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        sum += a[i] * b[i];
    }
    return sum;
}

CCP_AVX2 double residual_ssq_avx2(const double* y, const double* const* cols,
                                  const double* beta, std::size_t k, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d r = _mm256_loadu_pd(y + i);
        for (std::size_t j = 0; j < k; ++j) {
            r = _mm256_fnmadd_pd(_mm256_loadu_pd(cols[j] + i), _mm256_set1_pd(beta[j]), r);
        }
        acc = _mm256_fmadd_pd(r, r, acc);
    }
    double sum = hsum(acc);
    for (; i < n; ++i) {
        double r = y[i];
        for (std::size_t j = 0; j < k; ++j) {
            r -= cols[j][i] * beta[j];
        }
        sum += r * r;
    }
    return sum;
}

CCP_AVX2 void residuals_avx2(const double* y, const double* const* cols, const double* beta,
                             std::size_t k, std::size_t n, double* out) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d r = _mm256_loadu_pd(y + i);
        for (std::size_t j = 0; j < k; ++j) {
            r = _mm256_fnmadd_pd(_mm256_loadu_pd(cols[j] + i), _mm256_set1_pd(beta[j]), r);
        }
        _mm256_storeu_pd(out + i, r);
    }
    for (; i < n; ++i) {
        double r = y[i];
        for (std::size_t j = 0; j < k; ++j) {
            r -= cols[j][i] * beta[j];
        }
        out[i] = r;
    }
}

// Inclusive scan of four lanes in two shift-and-add steps, then a running
// carry broadcast from the top lane.
CCP_AVX2 void prefix_products_avx2(const double* a, const double* b, std::size_t n,
                                   double* out) {
    out[0] = 0.0;
    const __m256d zero = _mm256_setzero_pd();
    __m256d carry = zero;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        __m256d shift1 = _mm256_blend_pd(_mm256_permute4x64_pd(v, _MM_SHUFFLE(2, 1, 0, 0)), zero, 0x1);
        v = _mm256_add_pd(v, shift1);
        __m256d shift2 = _mm256_blend_pd(_mm256_permute4x64_pd(v, _MM_SHUFFLE(1, 0, 0, 0)), zero, 0x3);
        v = _mm256_add_pd(v, shift2);
        v = _mm256_add_pd(v, carry);
        _mm256_storeu_pd(out + i + 1, v);
        carry = _mm256_permute4x64_pd(v, _MM_SHUFFLE(3, 3, 3, 3));
    }
    for (; i < n; ++i) {
        out[i + 1] = out[i] + a[i] * b[i];
    }
}

} // namespace

namespace detail {
const KernelTable kAvx2Table{
    Isa::Avx2, dot_avx2, residual_ssq_avx2, residuals_avx2, prefix_products_avx2,
};
} // namespace detail

} // namespace ccp::kernels

#endif
