// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "usn/chebfun.hpp"
#include "usn/newton.hpp"
#include "usn/problems.hpp"

#include <complex>
#include <limits>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace usn {

/// Published solution length for a bank problem at its default parameters.
std::optional<std::size_t> reference_length(const std::string& name);

/// One bank run: a problem under one method.
struct CaseResult {
  std::string problem;
  std::string method;
  std::string status;
  bool converged = false;
  double residual = 0.0;
  double error = std::numeric_limits<double>::quiet_NaN();
  std::size_t length = 0;
  std::optional<std::size_t> reference;
  double seconds = 0.0;
  std::size_t outer_iterations = 0;
  std::size_t intermediate_iterations = 0;
  std::size_t gmres_iterations = 0;

  /// Converged with residual at or below `gate`.
  bool passes(double gate) const noexcept { return converged && residual <= gate; }
  /// Length within a factor `factor` of the reference (false without one).
  bool length_within(double factor) const noexcept;
};

CaseResult run_case(const std::string& name, const NewtonConfig& cfg,
                    const std::map<std::string, double>& overrides = {});

/// Columns: problem, method, residual_or_error (the error when a closed form
/// exists), time, length, then status, residual, error, reference_length,
/// outer_iterations, intermediate_iterations, gmres_iterations.
void write_bank_csv(std::ostream& os, std::span<const CaseResult> rows);

/// Eigenvalues of the n x n Jacobian section at u and of W^{-1} J (similar to
/// J W^{-1}), dense; n is bounded by kMaxSpectrumSize.
inline constexpr std::size_t kMaxSpectrumSize = 2048;
struct Spectra {
  std::size_t n = 0;
  std::vector<std::complex<double>> original;
  std::vector<std::complex<double>> preconditioned;
};
Spectra compute_spectra(const Problem& p, const ChebSeries& u, std::size_t n);

/// Fraction of `z` within distance r of c.
double fraction_within(std::span<const std::complex<double>> z, std::complex<double> c, double r);
/// max |z_i - c|.
double spread(std::span<const std::complex<double>> z, std::complex<double> c);
/// Header `re,im`, one eigenvalue per row.
void write_spectrum_csv(std::ostream& os, std::span<const std::complex<double>> z);

/// GMRES without restarts on J_n x = b at u, b uniform on [-1, 1] from `seed`.
struct KrylovProbe {
  bool converged = false;
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};
KrylovProbe probe_gmres(const Problem& p, const ChebSeries& u, std::size_t n, bool preconditioned,
                        double tol, std::size_t max_iterations, std::uint64_t seed);

}  // namespace usn
