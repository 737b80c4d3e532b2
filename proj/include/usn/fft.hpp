// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>

namespace usn {

/// Smallest integer >= n whose only prime factors are 2, 3 and 5.
std::size_t next_smooth_size(std::size_t n);

namespace detail {
struct PlanPairD;
struct PlanPairF;
}  // namespace detail

/// A real-to-complex / complex-to-real transform pair of fixed length.
///
/// Forward is unnormalized; backward returns length * input, the FFTW
/// convention. Execution is reentrant: the plan itself is immutable and
/// every call supplies its own buffers.
template <typename Real>
class RealFftPlan {
 public:
  using Complex = std::complex<Real>;

  std::size_t size() const noexcept { return size_; }
  std::size_t spectrum_size() const noexcept { return size_ / 2 + 1; }

  void forward(std::span<const Real> in, std::span<Complex> out) const;
  void backward(std::span<const Complex> in, std::span<Real> out) const;

  ~RealFftPlan();
  RealFftPlan(const RealFftPlan&) = delete;
  RealFftPlan& operator=(const RealFftPlan&) = delete;

 private:
  friend class FftPlanCache;
  explicit RealFftPlan(std::size_t n);

  std::size_t size_;
  void* forward_plan_ = nullptr;
  void* backward_plan_ = nullptr;
};

/// Process-wide cache of FFT plans keyed by transform length.
///
/// Planning is serialized (FFTW's planner is not thread safe); lookups take a
/// shared lock. A hit returns the identical plan object.
class FftPlanCache {
 public:
  static FftPlanCache& global();

  std::shared_ptr<const RealFftPlan<double>> plan_double(std::size_t n);
  std::shared_ptr<const RealFftPlan<float>> plan_float(std::size_t n);

  template <typename Real>
  std::shared_ptr<const RealFftPlan<Real>> plan(std::size_t n) {
    if constexpr (std::is_same_v<Real, double>) {
      return plan_double(n);
    } else {
      return plan_float(n);
    }
  }

  std::size_t cached_plans() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::size_t, std::shared_ptr<const RealFftPlan<double>>> double_plans_;
  std::map<std::size_t, std::shared_ptr<const RealFftPlan<float>>> float_plans_;
};

}  // namespace usn
