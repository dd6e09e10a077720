#include "arw/reweight.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace arw {

double WeightVector::sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }

double WeightVector::ball_deviation() const {
  const double u = center();
  double s = 0.0;
  for (double w : values) s += (w - u) * (w - u);
  return s;
}

double WeightVector::feasibility_residual() const {
  double r = 0.0;
  for (double w : values) r = std::max(r, -w);
  r = std::max(r, std::abs(sum() - static_cast<double>(n_u)));
  r = std::max(r, ball_deviation() - T * static_cast<double>(n_u));
  return r;
}

WeightVector uniform_weights(long n_p, long n_u, double T) {
  if (n_p < 1 || n_u < 1) throw std::invalid_argument("uniform_weights: group sizes must be positive");
  WeightVector w;
  w.n_u = n_u;
  w.T = T;
  w.values.assign(static_cast<std::size_t>(n_p), static_cast<double>(n_u) / static_cast<double>(n_p));
  return w;
}

double objective(std::span<const double> d, const WeightVector& w) {
  if (d.size() != w.values.size()) throw std::invalid_argument("objective: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) s += d[i] * w.values[i];
  return s;
}

namespace {

void check_inputs(std::span<const double> d, long n_u, double T) {
  if (d.empty()) throw std::invalid_argument("solve_weights: empty score vector");
  if (n_u < 1) throw std::invalid_argument("solve_weights: n_u must be positive");
  if (!(T >= 0.0)) throw std::invalid_argument("solve_weights: T must be nonnegative");
  for (double v : d)
    if (!std::isfinite(v)) throw std::invalid_argument("solve_weights: non-finite critic score");
}

}  // namespace

// The optimum has the form w_i = max(0, c - alpha * d_i): following alpha
// upward from 0 traces a path from the uniform center whose free set is
// always a prefix of d sorted ascending. On free set A (size k) the sum
// constraint fixes c, and the squared deviation is
//   k (n_u/k - u)^2 + (n_p - k) u^2 + alpha^2 * sum_A (d_i - mean_A)^2,
// so each segment's ball crossing is closed form. A segment ends when the
// largest free score block reaches zero; that block leaves the free set.
WeightVector solve_weights(std::span<const double> d_in, long n_u, double T) {
  check_inputs(d_in, n_u, T);
  const std::size_t n = d_in.size();
  WeightVector w = uniform_weights(static_cast<long>(n), n_u, T);
  if (T == 0.0 || n == 1) return w;

  // Shift and scale do not move the argmin; normalizing keeps the prefix
  // variances well conditioned.
  const double mean = std::accumulate(d_in.begin(), d_in.end(), 0.0) / static_cast<double>(n);
  double spread = 0.0;
  for (double v : d_in) spread = std::max(spread, std::abs(v - mean));
  if (spread == 0.0) return w;
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = (d_in[i] - mean) / spread;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  std::vector<double> s(n), s1(n + 1, 0.0), s2(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    s[k] = d[order[k]];
    s1[k + 1] = s1[k] + s[k];
    s2[k + 1] = s2[k] + s[k] * s[k];
  }
  auto exact_var = [&](std::size_t k, double m) {
    double v = 0.0;
    for (std::size_t i = 0; i < k; ++i) v += (s[i] - m) * (s[i] - m);
    return v;
  };

  const double nu = static_cast<double>(n_u);
  const double u = nu / static_cast<double>(n);
  const double r2 = T * nu;

  std::size_t k = n;
  double alpha = 0.0;
  while (true) {
    const double kd = static_cast<double>(k);
    const double m = s1[k] / kd;
    const double base = kd * (nu / kd - u) * (nu / kd - u) + static_cast<double>(n - k) * u * u;
    if (s[0] == s[k - 1]) {
      alpha = 0.0;  // all free scores tied: uniform on the block
      break;
    }
    // Prefix-sum variance picks the segment; the final one is recomputed exactly.
    const double var = std::max(s2[k] - kd * m * m, 1e-300);
    const double top = s[k - 1] - m;
    const double alpha_zero = (nu / kd) / top;
    if (std::sqrt(std::max(0.0, r2 - base) / var) <= alpha_zero) {
      alpha = std::min(alpha_zero, std::sqrt(std::max(0.0, r2 - base) / exact_var(k, m)));
      break;
    }
    std::size_t next = k - 1;
    while (next > 0 && s[next - 1] == s[k - 1]) --next;
    k = next;  // k >= 1: the smallest block is tied and exits above
  }

  const double kd = static_cast<double>(k);
  const double m = s1[k] / kd;
  std::fill(w.values.begin(), w.values.end(), 0.0);
  for (std::size_t i = 0; i < k; ++i) w.values[order[i]] = std::max(0.0, nu / kd - alpha * (s[i] - m));
  return w;
}

WeightVector oracle_solve_weights(std::span<const double> d, long n_u, double T) {
  check_inputs(d, n_u, T);
  const std::size_t n = d.size();
  if (n > 12) throw std::invalid_argument("oracle_solve_weights: n_p > 12");
  const double nu = static_cast<double>(n_u);
  const double u = nu / static_cast<double>(n);
  const double r2 = T * nu;

  WeightVector best;
  double best_obj = INFINITY;
  double best_norm = INFINITY;
  std::vector<double> cand(n);

  // Enumerate the free set F (complement is forced to zero). On F the
  // program is min d_F^T w_F s.t. sum w_F = n_u and the ball; its solution
  // is uniform when d is constant on F, otherwise it sits on the ball.
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) free.push_back(i);
    const double kd = static_cast<double>(free.size());
    double m = 0.0;
    for (std::size_t i : free) m += d[i];
    m /= kd;
    bool tied = true;
    double var = 0.0;
    for (std::size_t i : free) {
      tied = tied && d[i] == d[free.front()];
      var += (d[i] - m) * (d[i] - m);
    }
    const double base = kd * (nu / kd - u) * (nu / kd - u) + (static_cast<double>(n) - kd) * u * u;
    if (base > r2 + kConstraintTolerance) continue;

    std::fill(cand.begin(), cand.end(), 0.0);
    const double alpha = tied ? 0.0 : std::sqrt(std::max(0.0, r2 - base) / var);
    bool nonneg = true;
    for (std::size_t i : free) {
      cand[i] = nu / kd - alpha * (tied ? 0.0 : d[i] - m);
      nonneg = nonneg && cand[i] >= -1e-12;
    }
    if (!nonneg) continue;
    double obj = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cand[i] = std::max(0.0, cand[i]);
      obj += d[i] * cand[i];
      norm += cand[i] * cand[i];
    }
    const double tie_tol = 1e-12 * (1.0 + std::abs(obj));
    if (obj < best_obj - tie_tol || (obj <= best_obj + tie_tol && norm < best_norm)) {
      best_obj = obj;
      best_norm = norm;
      best.values = cand;
    }
  }
  best.n_u = n_u;
  best.T = T;
  return best;
}

void write_weights_csv(std::ostream& out, std::span<const double> d, const WeightVector& w) {
  if (d.size() != w.values.size()) throw std::invalid_argument("write_weights_csv: length mismatch");
  out << "index,critic_score,weight\n";
  out.precision(17);
  for (std::size_t i = 0; i < d.size(); ++i) out << i << ',' << d[i] << ',' << w.values[i] << '\n';
}

}  // namespace arw
