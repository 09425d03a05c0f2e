#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops shared by the network core and the twins.
// Scalar reference kernels always exist; an AVX2 variant of each is compiled
// on x86-64 and selected at runtime when the CPU supports it. Selection can
// be pinned with the FEDSKIP_KERNELS environment variable ("scalar"/"avx2").
//
// axpy is elementwise and bit-identical across backends (the AVX2 variant
// uses separate mul+add, matching the scalar rounding). dot and sumsq
// reduce in a different association order under AVX2, so cross-backend
// agreement is to ~1e-13 relative, not bitwise; within one backend every
// kernel is exactly deterministic.

namespace fedskip::kernels {

enum class Backend { Scalar, Avx2 };

Backend active_backend();
std::string_view backend_name(Backend b);
bool avx2_supported();

// Overrides the dispatched backend. Throws ValidationError if the requested
// backend is not available on this machine. Intended for tests and the
// FEDSKIP_KERNELS override; not thread-safe against concurrent kernel calls.
void force_backend(Backend b);

double dot(const double* a, const double* b, size_t n);
double sumsq(const double* a, size_t n);
// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, size_t n);

namespace scalar {
double dot(const double* a, const double* b, size_t n);
double sumsq(const double* a, size_t n);
void axpy(double a, const double* x, double* y, size_t n);
}  // namespace scalar

#if FEDSKIP_HAVE_AVX2
namespace avx2 {
double dot(const double* a, const double* b, size_t n);
double sumsq(const double* a, size_t n);
void axpy(double a, const double* x, double* y, size_t n);
}  // namespace avx2
#endif

}  // namespace fedskip::kernels
