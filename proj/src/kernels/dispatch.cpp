#include "ccp/error.hpp"
#include "ccp/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace ccp::kernels {

namespace {

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* select_default() {
    const char* force = std::getenv("CCP_FORCE_SCALAR");
    if (force != nullptr && std::string(force) != "0" && std::string(force) != "") {
        return &detail::kScalarTable;
    }
#if defined(__x86_64__) || defined(_M_X64)
    if (cpu_has_avx2()) {
        return &detail::kAvx2Table;
    }
#endif
    return &detail::kScalarTable;
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> table{select_default()};
    return table;
}

} // namespace

bool isa_supported(Isa isa) {
    switch (isa) {
    case Isa::Scalar:
        return true;
    case Isa::Avx2:
        return cpu_has_avx2();
    }
    return false;
}

const KernelTable& table(Isa isa) {
    if (!isa_supported(isa)) {
        throw Error("instruction set " + std::string(name(isa)) + " not supported on this CPU");
    }
#if defined(__x86_64__) || defined(_M_X64)
    if (isa == Isa::Avx2) {
        return detail::kAvx2Table;
    }
#endif
    return detail::kScalarTable;
}

const KernelTable& active() {
    return *current().load(std::memory_order_acquire);
}

void force_isa(Isa isa) {
    current().store(&table(isa), std::memory_order_release);
}

std::string_view name(Isa isa) {
    switch (isa) {
    case Isa::Scalar:
        return "scalar";
    case Isa::Avx2:
        return "avx2";
    }
    return "unknown";
}

} // namespace ccp::kernels
