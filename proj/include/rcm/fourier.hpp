#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <vector>

#include "rcm/errors.hpp"

namespace rcm::fourier {

namespace detail {

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

/// In-place unnormalised d-dimensional DFT of row-major data;
/// sign = -1 is the forward transform sum_n f_n exp(-2 pi i m n / N).
inline void transform(std::vector<std::complex<double>>& data, const std::vector<int>& dims, int sign) {
  std::size_t total = 1;
  for (int n : dims) total *= static_cast<std::size_t>(n);
  if (dims.empty() || total != data.size()) throw PreconditionError("FFT data size does not match the grid");
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  std::lock_guard<std::mutex> lock(detail::planner_mutex());
  fftw_plan plan = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), ptr, ptr,
                                 sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
  if (!plan) throw Error("FFTW planning failed");
  fftw_execute(plan);
  fftw_destroy_plan(plan);
}

/// Angular wavenumbers 2 pi m / length in FFT order (m = 0..n/2-1, -n/2..-1).
inline std::vector<double> wavenumbers(int n, double length) {
  std::vector<double> k(static_cast<std::size_t>(n));
  for (int m = 0; m < n; ++m) {
    const int mm = m < (n + 1) / 2 ? m : m - n;
    k[static_cast<std::size_t>(m)] = 2.0 * std::numbers::pi * mm / length;
  }
  return k;
}

/// Multi-index of a row-major flat index.
inline std::vector<int> unflatten(std::size_t idx, const std::vector<int>& dims) {
  std::vector<int> m(dims.size());
  for (std::size_t i = dims.size(); i-- > 0;) {
    m[i] = static_cast<int>(idx % static_cast<std::size_t>(dims[i]));
    idx /= static_cast<std::size_t>(dims[i]);
  }
  return m;
}

}  // namespace rcm::fourier
