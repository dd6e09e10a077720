#include "arw/metrics.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace arw {

double Confusion::accuracy() const {
  if (total() == 0) throw std::invalid_argument("accuracy of an empty group");
  return static_cast<double>(tp + tn) / static_cast<double>(total());
}

double Confusion::positive_rate() const {
  if (total() == 0) throw std::invalid_argument("positive rate of an empty group");
  return static_cast<double>(tp + fp) / static_cast<double>(total());
}

std::optional<double> Confusion::fpr() const {
  if (negatives() == 0) return std::nullopt;
  return static_cast<double>(fp) / static_cast<double>(negatives());
}

std::optional<double> Confusion::fnr() const {
  if (positives() == 0) return std::nullopt;
  return static_cast<double>(fn) / static_cast<double>(positives());
}

EvalReport EvalReport::from_counts(const std::array<Confusion, 2>& counts) {
  if (counts[0].total() == 0 || counts[1].total() == 0)
    throw std::invalid_argument("evaluate: both sensitive groups must be nonempty");
  EvalReport r;
  r.counts = counts;
  const long n = counts[0].total() + counts[1].total();
  r.accuracy = static_cast<double>(counts[0].tp + counts[0].tn + counts[1].tp + counts[1].tn) / static_cast<double>(n);
  for (int s = 0; s < 2; ++s) r.accuracy_by_group[s] = counts[s].accuracy();
  r.disparate_impact = counts[1].positive_rate() - counts[0].positive_rate();
  const auto f1 = counts[1].fpr(), f0 = counts[0].fpr();
  if (f1 && f0) r.disparate_fpr = *f1 - *f0;
  const auto n1 = counts[1].fnr(), n0 = counts[0].fnr();
  if (n1 && n0) r.disparate_fnr = *n1 - *n0;
  return r;
}

EvalReport evaluate(std::span<const int> predicted, std::span<const int> labels, std::span<const int> sensitive) {
  if (predicted.size() != labels.size() || labels.size() != sensitive.size())
    throw std::invalid_argument("evaluate: length mismatch");
  std::array<Confusion, 2> c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predicted[i], y = labels[i], s = sensitive[i];
    if ((p != 0 && p != 1) || (y != 0 && y != 1) || (s != 0 && s != 1))
      throw std::invalid_argument("evaluate: values must be 0 or 1");
    Confusion& g = c[static_cast<std::size_t>(s)];
    if (p && y) ++g.tp;
    else if (p) ++g.fp;
    else if (y) ++g.fn;
    else ++g.tn;
  }
  return EvalReport::from_counts(c);
}

EvalReport evaluate(std::span<const Prediction> predictions, std::span<const int> labels,
                    std::span<const int> sensitive) {
  std::vector<int> p(predictions.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = predictions[i].label;
  return evaluate(std::span<const int>(p), labels, sensitive);
}

double pairwise_disparate_impact(std::span<const int> predicted, std::span<const int> group, int first, int second) {
  if (predicted.size() != group.size()) throw std::invalid_argument("pairwise_disparate_impact: length mismatch");
  long n[2] = {0, 0}, pos[2] = {0, 0};
  for (std::size_t i = 0; i < group.size(); ++i) {
    const int k = group[i] == first ? 0 : group[i] == second ? 1 : -1;
    if (k < 0) continue;
    ++n[k];
    pos[k] += predicted[i];
  }
  if (n[0] == 0 || n[1] == 0) throw std::invalid_argument("pairwise_disparate_impact: empty group");
  return static_cast<double>(pos[0]) / static_cast<double>(n[0]) -
         static_cast<double>(pos[1]) / static_cast<double>(n[1]);
}

double empirical_lipschitz(std::span<const int> predicted, const Matrix& latents) {
  if (static_cast<std::size_t>(latents.rows()) != predicted.size())
    throw std::invalid_argument("empirical_lipschitz: length mismatch");
  if (latents.rows() < 2) throw std::invalid_argument("empirical_lipschitz: need at least two latents");
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < latents.rows(); ++i)
    for (Eigen::Index j = i + 1; j < latents.rows(); ++j) {
      if (predicted[static_cast<std::size_t>(i)] == predicted[static_cast<std::size_t>(j)]) continue;
      best = std::min(best, (latents.row(i) - latents.row(j)).norm());
    }
  if (std::isinf(best)) return 0.0;
  if (best == 0.0) throw std::domain_error("empirical_lipschitz: identical points with different predictions");
  return 1.0 / best;
}

double empirical_lipschitz(const MlpModel& classifier, const Matrix& latents) {
  const auto preds = classify_batch(classifier, latents);
  std::vector<int> labels(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) labels[i] = preds[i].label;
  return empirical_lipschitz(std::span<const int>(labels), latents);
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

nlohmann::json confusion_json(const Confusion& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

std::string pct(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * *v);
  return buf;
}

}  // namespace

std::string to_json(const EvalReport& r) {
  nlohmann::json j;
  j["sign_convention"] = "group1_minus_group0";
  j["accuracy"] = r.accuracy;
  j["accuracy_by_group"] = {{"0", r.accuracy_by_group[0]}, {"1", r.accuracy_by_group[1]}};
  j["disparate_impact"] = r.disparate_impact;
  j["disparate_fpr"] = optional_json(r.disparate_fpr);
  j["disparate_fnr"] = optional_json(r.disparate_fnr);
  j["abs_disparate_impact"] = std::abs(r.disparate_impact);
  j["abs_disparate_fpr"] = r.disparate_fpr ? nlohmann::json(std::abs(*r.disparate_fpr)) : nlohmann::json();
  j["abs_disparate_fnr"] = r.disparate_fnr ? nlohmann::json(std::abs(*r.disparate_fnr)) : nlohmann::json();
  j["counts"] = {{"0", confusion_json(r.counts[0])}, {"1", confusion_json(r.counts[1])}};
  return j.dump(2);
}

std::string to_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "Accuracy,Disparate Impact,Disparate FPR,Disparate FNR,|Disparate Impact|\n";
  out << pct(r.accuracy) << ',' << pct(r.disparate_impact) << ',' << pct(r.disparate_fpr) << ','
      << pct(r.disparate_fnr) << ',' << pct(std::abs(r.disparate_impact)) << '\n';
  return out.str();
}

std::string MetricSummary::cell() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f (%.1f)", mean, sd);
  return buf;
}

MetricSummary summarize_percent(std::span<const double> values) {
  MetricSummary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = 100.0 * std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (100.0 * v - s.mean) * (100.0 * v - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

}  // namespace arw
