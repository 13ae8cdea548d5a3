#pragma once

// Tridiagonal kernels shared by the eigensolver and the propagators.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace qfin::detail {

/// Number of eigenvalues strictly below `shift` of the symmetric tridiagonal
/// matrix with the given diagonal and constant off-diagonal (Sturm sequence).
std::size_t sturm_count(std::span<const double> diagonal, double off, double shift);

/// k-th smallest eigenvalue (0-based) by bisection to full precision.
double bisect_eigenvalue(std::span<const double> diagonal, double off, std::size_t k);

/// Solves (T - shift I) y = rhs with partial pivoting; near-zero pivots are
/// replaced by `tiny`. Used by inverse iteration.
std::vector<double> shifted_solve(std::span<const double> diagonal, double off, double shift,
                                  std::span<const double> rhs, double tiny);

/// Solves a general tridiagonal complex system by the Thomas algorithm.
/// `lower[i]` couples row i+1 to column i, `upper[i]` couples row i to i+1.
/// Returns false on a vanishing pivot.
bool thomas_solve(std::span<const std::complex<double>> lower,
                  std::span<const std::complex<double>> diagonal,
                  std::span<const std::complex<double>> upper,
                  std::span<std::complex<double>> rhs_inout);

} // namespace qfin::detail
