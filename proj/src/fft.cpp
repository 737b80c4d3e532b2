// SPDX-License-Identifier: Apache-2.0
#include "usn/fft.hpp"

#include <fftw3.h>

#include <stdexcept>

namespace usn {

std::size_t next_smooth_size(std::size_t n) {
  if (n <= 1) return 1;
  for (std::size_t m = n;; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2u, 3u, 5u}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

namespace {
// FFTW's planner is not reentrant; all plan creation and destruction goes
// through this lock.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
constexpr unsigned kPlanFlags = FFTW_ESTIMATE | FFTW_UNALIGNED;
}  // namespace

template <>
RealFftPlan<double>::RealFftPlan(std::size_t n) : size_(n) {
  std::lock_guard lock(planner_mutex());
  double* r = fftw_alloc_real(n);
  fftw_complex* c = fftw_alloc_complex(n / 2 + 1);
  forward_plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), r, c, kPlanFlags);
  backward_plan_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), c, r,
                                        kPlanFlags | FFTW_PRESERVE_INPUT);
  fftw_free(r);
  fftw_free(c);
  if (!forward_plan_ || !backward_plan_) throw std::runtime_error("fftw planning failed");
}

template <>
RealFftPlan<double>::~RealFftPlan() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(backward_plan_));
}

template <>
void RealFftPlan<double>::forward(std::span<const double> in, std::span<Complex> out) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), const_cast<double*>(in.data()),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

template <>
void RealFftPlan<double>::backward(std::span<const Complex> in, std::span<double> out) const {
  fftw_execute_dft_c2r(static_cast<fftw_plan>(backward_plan_),
                       reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in.data())),
                       out.data());
}

template <>
RealFftPlan<float>::RealFftPlan(std::size_t n) : size_(n) {
  std::lock_guard lock(planner_mutex());
  float* r = fftwf_alloc_real(n);
  fftwf_complex* c = fftwf_alloc_complex(n / 2 + 1);
  forward_plan_ = fftwf_plan_dft_r2c_1d(static_cast<int>(n), r, c, kPlanFlags);
  backward_plan_ = fftwf_plan_dft_c2r_1d(static_cast<int>(n), c, r,
                                         kPlanFlags | FFTW_PRESERVE_INPUT);
  fftwf_free(r);
  fftwf_free(c);
  if (!forward_plan_ || !backward_plan_) throw std::runtime_error("fftwf planning failed");
}

template <>
RealFftPlan<float>::~RealFftPlan() {
  std::lock_guard lock(planner_mutex());
  fftwf_destroy_plan(static_cast<fftwf_plan>(forward_plan_));
  fftwf_destroy_plan(static_cast<fftwf_plan>(backward_plan_));
}

template <>
void RealFftPlan<float>::forward(std::span<const float> in, std::span<Complex> out) const {
  fftwf_execute_dft_r2c(static_cast<fftwf_plan>(forward_plan_), const_cast<float*>(in.data()),
                        reinterpret_cast<fftwf_complex*>(out.data()));
}

template <>
void RealFftPlan<float>::backward(std::span<const Complex> in, std::span<float> out) const {
  fftwf_execute_dft_c2r(static_cast<fftwf_plan>(backward_plan_),
                        reinterpret_cast<fftwf_complex*>(const_cast<Complex*>(in.data())),
                        out.data());
}

FftPlanCache& FftPlanCache::global() {
  static FftPlanCache cache;
  return cache;
}

namespace {
template <typename Real, typename Map>
std::shared_ptr<const RealFftPlan<Real>> lookup_or_insert(std::shared_mutex& mutex, Map& plans,
                                                          std::size_t n, auto make) {
  {
    std::shared_lock lock(mutex);
    if (auto it = plans.find(n); it != plans.end()) return it->second;
  }
  std::unique_lock lock(mutex);
  if (auto it = plans.find(n); it != plans.end()) return it->second;
  auto plan = make();
  plans.emplace(n, plan);
  return plan;
}
}  // namespace

std::shared_ptr<const RealFftPlan<double>> FftPlanCache::plan_double(std::size_t n) {
  return lookup_or_insert<double>(mutex_, double_plans_, n, [n] {
    return std::shared_ptr<const RealFftPlan<double>>(new RealFftPlan<double>(n));
  });
}

std::shared_ptr<const RealFftPlan<float>> FftPlanCache::plan_float(std::size_t n) {
  return lookup_or_insert<float>(mutex_, float_plans_, n, [n] {
    return std::shared_ptr<const RealFftPlan<float>>(new RealFftPlan<float>(n));
  });
}

std::size_t FftPlanCache::cached_plans() const {
  std::shared_lock lock(mutex_);
  return double_plans_.size() + float_plans_.size();
}

}  // namespace usn
