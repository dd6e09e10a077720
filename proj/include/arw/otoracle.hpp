#pragma once

// Exact optimal transport between finite weighted point clouds.

#include "arw/models.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace arw {

struct WeightedPointCloud {
  Matrix points;                // one point per row
  std::vector<double> masses;   // same length as points.rows()

  std::size_t size() const { return masses.size(); }
  Eigen::Index dim() const { return points.cols(); }

  static WeightedPointCloud uniform(Matrix points);
  /// Copies the cloud with masses scaled to sum 1 and zero-mass points removed.
  WeightedPointCloud normalized() const;
  void validate() const;
};

struct TransportPlan {
  Matrix matrix;  // |a| x |b|, indexed against the clouds as passed in
  double cost = 0.0;
};

struct TransportResult {
  double distance = 0.0;
  TransportPlan plan;
};

/// Ground cost ||x - y|| (p = 1) or ||x - y||^2 (p = 2); the distance is the
/// optimal plan cost without a root. Masses are normalized to sum 1.
TransportResult exact_wasserstein(const WeightedPointCloud& a, const WeightedPointCloud& b, int p = 1);

/// Min-cost transport on an explicit cost matrix by network simplex.
/// supply and demand must be positive and have (nearly) equal totals.
TransportPlan solve_transport(const Matrix& cost, std::span<const double> supply, std::span<const double> demand);

/// sum_a mass * D(point) - sum_b mass * D(point).
double critic_distance_estimate(const MlpModel& critic, const WeightedPointCloud& a, const WeightedPointCloud& b);

/// Pushes the cloud through the classifier's hard labels: 1-D points {0, 1}
/// carrying the aggregated mass of each predicted label. Labels that get no
/// mass are omitted.
WeightedPointCloud pushforward_cloud(const MlpModel& classifier, const WeightedPointCloud& a);

struct LipschitzReport {
  double K = 0.0;
  double lhs = 0.0;  // W1 of the push-forwards
  double rhs = 0.0;  // K * W1 of the clouds
  bool holds = true;
};

LipschitzReport verify_lipschitz_bound(const MlpModel& classifier, const WeightedPointCloud& a,
                                       const WeightedPointCloud& b);

/// Uniform subsample of at most max_points positive-mass rows, masses renormalized.
WeightedPointCloud subsample(const WeightedPointCloud& a, std::size_t max_points, std::uint64_t seed);

struct SubsampledDistance {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t subsample_size = 0;
  std::vector<double> values;
};

/// W_p on repeated uniform subsamples (<= max_points per cloud).
SubsampledDistance subsampled_wasserstein(const WeightedPointCloud& a, const WeightedPointCloud& b, int p,
                                          std::size_t max_points, int repeats, std::uint64_t seed);

/// {"phase": ..., "p": ..., "distance": ..., "subsample_size": ..., "seed": ...}
std::string distance_report_line(const std::string& phase, int p, double distance, std::size_t subsample_size,
                                 std::uint64_t seed);

}  // namespace arw
