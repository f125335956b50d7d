#include "ccp/kernels.hpp"

namespace ccp::kernels {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += a[i] * b[i];
    }
    return sum;
}

double residual_ssq_scalar(const double* y, const double* const* cols, const double* beta,
                           std::size_t k, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = y[i];
        for (std::size_t j = 0; j < k; ++j) {
            r -= cols[j][i] * beta[j];
        }
        sum += r * r;
    }
    return sum;
}

void residuals_scalar(const double* y, const double* const* cols, const double* beta,
                      std::size_t k, std::size_t n, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        double r = y[i];
        for (std::size_t j = 0; j < k; ++j) {
            r -= cols[j][i] * beta[j];
        }
        out[i] = r;
    }
}

void prefix_products_scalar(const double* a, const double* b, std::size_t n, double* out) {
    out[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i + 1] = out[i] + a[i] * b[i];
    }
}

} // namespace

namespace detail {
const KernelTable kScalarTable{
    Isa::Scalar, dot_scalar, residual_ssq_scalar, residuals_scalar, prefix_products_scalar,
};
} // namespace detail

} // namespace ccp::kernels
