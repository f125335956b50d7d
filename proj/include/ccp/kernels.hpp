#pragma once

// Data-parallel inner loops over time points. Every kernel has a scalar
// reference implementation and, on x86-64, an AVX2+FMA variant. The variant
// is chosen once at startup from CPUID; CCP_FORCE_SCALAR=1 in the
// environment or force_isa() pins the scalar path.
//
// Columns are contiguous arrays of n doubles (the column-major layout of
// Dataset). SIMD variants reassociate sums, so results agree with the scalar
// path to rounding, not bit for bit.

#include <cstddef>
#include <string_view>

namespace ccp::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
    Isa isa;

    /// sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);

    /// sum_i (y[i] - sum_j cols[j][i] * beta[j])^2 over k columns
    double (*residual_ssq)(const double* y, const double* const* cols, const double* beta,
                           std::size_t k, std::size_t n);

    /// out[i] = y[i] - sum_j cols[j][i] * beta[j]
    void (*residuals)(const double* y, const double* const* cols, const double* beta,
                      std::size_t k, std::size_t n, double* out);

    /// out[0] = 0, out[i + 1] = out[i] + a[i] * b[i]; out has n + 1 entries.
    void (*prefix_products)(const double* a, const double* b, std::size_t n, double* out);
};

bool isa_supported(Isa isa);

/// Table for a specific ISA. Throws ccp::Error if unsupported on this CPU.
const KernelTable& table(Isa isa);

/// Table currently in use.
const KernelTable& active();

/// Overrides runtime selection. Throws if the ISA is unsupported.
void force_isa(Isa isa);

std::string_view name(Isa isa);

namespace detail {
extern const KernelTable kScalarTable;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable kAvx2Table;
#endif
} // namespace detail

} // namespace ccp::kernels
