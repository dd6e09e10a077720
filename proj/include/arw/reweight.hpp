#pragma once

// Majority-group weights on the feasible set
//   W = { w : w_i >= 0, sum_i w_i = n_u, sum_i (w_i - n_u/n_p)^2 <= T * n_u }
// and the linear program  min_w d^T w  over W.

#include <iosfwd>
#include <span>
#include <vector>

namespace arw {

inline constexpr double kConstraintTolerance = 1e-8;
inline constexpr double kObjectiveTolerance = 1e-6;

struct WeightVector {
  std::vector<double> values;
  long n_u = 1;
  double T = 0.0;

  std::size_t n_p() const { return values.size(); }
  double center() const { return static_cast<double>(n_u) / static_cast<double>(values.size()); }
  double sum() const;
  /// sum_i (w_i - n_u/n_p)^2
  double ball_deviation() const;
  /// Largest violation over the three constraints (0 when feasible).
  double feasibility_residual() const;
  bool feasible(double tol = kConstraintTolerance) const { return feasibility_residual() <= tol; }
};

/// All entries n_u / n_p.
WeightVector uniform_weights(long n_p, long n_u, double T);

/// Exact minimizer of d^T w over W. Ties in d get equal weights, so the
/// minimum-norm optimizer is returned when the optimum is not unique.
/// Throws std::invalid_argument for T < 0, empty d, n_u < 1 or non-finite d.
WeightVector solve_weights(std::span<const double> d, long n_u, double T);

/// Reference solver by enumeration of zero patterns; n_p <= 12.
WeightVector oracle_solve_weights(std::span<const double> d, long n_u, double T);

double objective(std::span<const double> d, const WeightVector& w);

/// One row per majority sample: index, critic score, weight.
void write_weights_csv(std::ostream& out, std::span<const double> d, const WeightVector& w);

}  // namespace arw
