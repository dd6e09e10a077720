#pragma once

// Accuracy and group disparity metrics. Disparities are signed as
// group s=1 (majority) minus group s=0 (minority).

#include "arw/models.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace arw {

struct Confusion {
  long tp = 0, fp = 0, tn = 0, fn = 0;

  long total() const { return tp + fp + tn + fn; }
  long positives() const { return tp + fn; }
  long negatives() const { return fp + tn; }
  double accuracy() const;
  double positive_rate() const;
  /// nullopt when the group has no negatives (FPR) or positives (FNR).
  std::optional<double> fpr() const;
  std::optional<double> fnr() const;
};

struct EvalReport {
  std::array<Confusion, 2> counts;  // indexed by s
  double accuracy = 0.0;
  std::array<double, 2> accuracy_by_group{};
  double disparate_impact = 0.0;
  std::optional<double> disparate_fpr;
  std::optional<double> disparate_fnr;

  static EvalReport from_counts(const std::array<Confusion, 2>& counts);
};

/// Throws std::invalid_argument on length mismatch, labels outside {0,1} or
/// an empty group.
EvalReport evaluate(std::span<const Prediction> predictions, std::span<const int> labels,
                    std::span<const int> sensitive);
EvalReport evaluate(std::span<const int> predicted_labels, std::span<const int> labels,
                    std::span<const int> sensitive);

/// Positive-rate difference between two arbitrary groups given by a per-row
/// group index: P(yhat=1 | g=first) - P(yhat=1 | g=second).
double pairwise_disparate_impact(std::span<const int> predicted_labels, std::span<const int> group, int first,
                                 int second);

/// K = 1 / min distance between differently predicted rows; 0 when all
/// predictions agree. Throws when two identical rows get different labels.
double empirical_lipschitz(std::span<const int> predicted_labels, const Matrix& latents);
double empirical_lipschitz(const MlpModel& classifier, const Matrix& latents);

std::string to_json(const EvalReport& r);
/// Header plus one row, in percent.
std::string to_csv(const EvalReport& r);

struct MetricSummary {
  double mean = 0.0;
  double sd = 0.0;
  std::string cell() const;  // "83.1 (0.4)"
};

/// Mean and sample standard deviation, both scaled by 100.
MetricSummary summarize_percent(std::span<const double> values);

}  // namespace arw
