#include "fedskip/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "fedskip/errors.hpp"

namespace fedskip::kernels {

namespace scalar {

double dot(const double* a, const double* b, size_t n) {
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

double sumsq(const double* a, size_t n) {
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) sum += a[i] * a[i];
    return sum;
}

void axpy(double a, const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace scalar

namespace {

struct Vtable {
    double (*dot)(const double*, const double*, size_t);
    double (*sumsq)(const double*, size_t);
    void (*axpy)(double, const double*, double*, size_t);
};

constexpr Vtable kScalarTable{scalar::dot, scalar::sumsq, scalar::axpy};
#if FEDSKIP_HAVE_AVX2
constexpr Vtable kAvx2Table{avx2::dot, avx2::sumsq, avx2::axpy};
#endif

std::atomic<const Vtable*> g_table{nullptr};
std::atomic<Backend> g_backend{Backend::Scalar};

Backend pick_backend() {
    const char* env = std::getenv("FEDSKIP_KERNELS");
    if (env != nullptr) {
        std::string v(env);
        if (v == "scalar") return Backend::Scalar;
        if (v == "avx2") {
            if (!avx2_supported())
                throw ValidationError("FEDSKIP_KERNELS=avx2 but AVX2 is unavailable");
            return Backend::Avx2;
        }
        throw ValidationError("FEDSKIP_KERNELS must be 'scalar' or 'avx2', got '" + v + "'");
    }
    return avx2_supported() ? Backend::Avx2 : Backend::Scalar;
}

const Vtable* table_for(Backend b) {
#if FEDSKIP_HAVE_AVX2
    if (b == Backend::Avx2) return &kAvx2Table;
#endif
    (void)b;
    return &kScalarTable;
}

const Vtable* table() {
    const Vtable* t = g_table.load(std::memory_order_acquire);
    if (t == nullptr) {
        Backend b = pick_backend();
        g_backend.store(b, std::memory_order_relaxed);
        t = table_for(b);
        g_table.store(t, std::memory_order_release);
    }
    return t;
}

}  // namespace

bool avx2_supported() {
#if FEDSKIP_HAVE_AVX2
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend active_backend() {
    table();
    return g_backend.load(std::memory_order_relaxed);
}

std::string_view backend_name(Backend b) {
    switch (b) {
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
    }
    return "unknown";
}

void force_backend(Backend b) {
    if (b == Backend::Avx2 && !avx2_supported())
        throw ValidationError("cannot force AVX2 kernels: unsupported on this CPU");
    g_backend.store(b, std::memory_order_relaxed);
    g_table.store(table_for(b), std::memory_order_release);
}

double dot(const double* a, const double* b, size_t n) { return table()->dot(a, b, n); }
double sumsq(const double* a, size_t n) { return table()->sumsq(a, n); }
void axpy(double a, const double* x, double* y, size_t n) { table()->axpy(a, x, y, n); }

}  // namespace fedskip::kernels
