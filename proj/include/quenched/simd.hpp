#pragma once

// Data-parallel inner loops: batch fiber-map evaluation and reductions.
//
// Every kernel has a scalar reference implementation and (on x86-64) an
// AVX2 variant chosen at runtime. The reference kernels follow the exact
// operation sequence of the vector code, including the 4-lane accumulation
// order of the reductions, so both paths produce bit-identical results.
// Setting QUENCHED_SIMD=scalar in the environment forces the reference path.

#include <cstddef>
#include <span>

namespace quenched::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  // out[i] = exp(in[i]); inputs below -708 flush to 0.
  void (*exp)(const double* in, double* out, std::size_t n);
  // out[i] = log(in[i]) for in[i] > 0, -inf at 0.
  void (*log)(const double* in, double* out, std::size_t n);
  // Full LSV map: x(1 + (2x)^alpha) on [0,1/2), 2x - 1 on [1/2,1].
  void (*lsv_apply)(double alpha, const double* in, double* out, std::size_t n);
  // Left LSV branch only, in place.
  void (*lsv_left)(double alpha, double* x, std::size_t n);
  // Doubling map with the branch point 1/2 on the right branch.
  void (*doubling_apply)(const double* in, double* out, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
  double (*abs_sum)(const double* a, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*abs_diff_sum)(const double* a, const double* b, std::size_t n);
  // sum_i w[i] * v[i]^2
  double (*weighted_square_sum)(const double* v, const double* w, std::size_t n);
};

const KernelTable& scalar_kernels();
// nullptr when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

// The table selected for this process.
const KernelTable& kernels();
Isa active_isa();
const char* isa_name(Isa isa);

// Scalar reference for one point; same bits as the batch kernels.
double lsv_left_point(double alpha, double x);
double exp_point(double y);
double log_point(double x);

// Span conveniences over kernels().
inline void lsv_apply(double alpha, std::span<const double> in, std::span<double> out) {
  kernels().lsv_apply(alpha, in.data(), out.data(), in.size());
}
inline void lsv_left(double alpha, std::span<double> x) {
  kernels().lsv_left(alpha, x.data(), x.size());
}
inline void doubling_apply(std::span<const double> in, std::span<double> out) {
  kernels().doubling_apply(in.data(), out.data(), in.size());
}
inline double sum(std::span<const double> a) { return kernels().sum(a.data(), a.size()); }
inline double abs_sum(std::span<const double> a) { return kernels().abs_sum(a.data(), a.size()); }
inline double dot(std::span<const double> a, std::span<const double> b) {
  return kernels().dot(a.data(), b.data(), a.size());
}
inline double abs_diff_sum(std::span<const double> a, std::span<const double> b) {
  return kernels().abs_diff_sum(a.data(), b.data(), a.size());
}
inline double weighted_square_sum(std::span<const double> v, std::span<const double> w) {
  return kernels().weighted_square_sum(v.data(), w.data(), v.size());
}

}  // namespace quenched::simd
