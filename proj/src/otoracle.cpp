#include "arw/otoracle.hpp"

#include "arw/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace arw {

WeightedPointCloud WeightedPointCloud::uniform(Matrix points) {
  WeightedPointCloud c;
  const auto n = static_cast<std::size_t>(points.rows());
  c.points = std::move(points);
  c.masses.assign(n, n ? 1.0 / static_cast<double>(n) : 0.0);
  return c;
}

void WeightedPointCloud::validate() const {
  if (static_cast<std::size_t>(points.rows()) != masses.size())
    throw std::invalid_argument("point cloud: point and mass counts differ");
  double total = 0.0;
  for (double m : masses) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw std::invalid_argument("point cloud: masses must be finite and >= 0");
    total += m;
  }
  if (masses.empty() || total <= 0.0) throw std::invalid_argument("point cloud: empty or zero total mass");
}

WeightedPointCloud WeightedPointCloud::normalized() const {
  validate();
  const double total = std::accumulate(masses.begin(), masses.end(), 0.0);
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < masses.size(); ++i)
    if (masses[i] > 0.0) keep.push_back(static_cast<Eigen::Index>(i));
  WeightedPointCloud out;
  out.points.resize(static_cast<Eigen::Index>(keep.size()), points.cols());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.points.row(static_cast<Eigen::Index>(k)) = points.row(keep[k]);
    out.masses.push_back(masses[static_cast<std::size_t>(keep[k])] / total);
  }
  return out;
}

namespace {

// Network simplex on the complete bipartite graph sources -> sinks, with an
// artificial root joined to every node. Non-tree arcs always sit at zero
// flow (all arcs are uncapacitated). Leaving arcs follow the
// strongly-feasible-tree rule, which rules out cycling under degeneracy.
class TransportSimplex {
 public:
  TransportSimplex(const Matrix& cost, std::span<const double> supply, std::span<const double> demand)
      : cost_(cost), m_(cost.rows()), n_(cost.cols()), nodes_(m_ + n_ + 1), root_(m_ + n_),
        real_arcs_(m_ * n_) {
    const double max_cost = cost.size() ? cost.cwiseAbs().maxCoeff() : 0.0;
    art_cost_ = (max_cost + 1.0) * static_cast<double>(nodes_);
    eps_ = 1e-12 * art_cost_;
    flow_.assign(static_cast<std::size_t>(real_arcs_ + m_ + n_), 0.0);
    tree_.reserve(static_cast<std::size_t>(nodes_ - 1));
    for (Eigen::Index i = 0; i < m_; ++i) {
      flow_[static_cast<std::size_t>(real_arcs_ + i)] = supply[static_cast<std::size_t>(i)];
      tree_.push_back(real_arcs_ + i);
    }
    for (Eigen::Index j = 0; j < n_; ++j) {
      flow_[static_cast<std::size_t>(real_arcs_ + m_ + j)] = demand[static_cast<std::size_t>(j)];
      tree_.push_back(real_arcs_ + m_ + j);
    }
    parent_.resize(static_cast<std::size_t>(nodes_));
    parent_arc_.resize(static_cast<std::size_t>(nodes_));
    up_.resize(static_cast<std::size_t>(nodes_));
    depth_.resize(static_cast<std::size_t>(nodes_));
    pi_.resize(static_cast<std::size_t>(nodes_));
    tree_pos_.assign(flow_.size(), -1);
    for (std::size_t k = 0; k < tree_.size(); ++k) tree_pos_[static_cast<std::size_t>(tree_[k])] = static_cast<long>(k);
    block_ = std::max<Eigen::Index>(10, static_cast<Eigen::Index>(std::sqrt(static_cast<double>(real_arcs_))));
  }

  void run() {
    rebuild();
    const long max_pivots = 50L * (real_arcs_ + nodes_) + 1000;
    for (long it = 0; it < max_pivots; ++it) {
      const Eigen::Index enter = find_entering();
      if (enter < 0) return;
      pivot(enter);
    }
    throw std::runtime_error("transport simplex: pivot limit reached");
  }

  TransportPlan plan() const {
    TransportPlan p;
    p.matrix = Matrix::Zero(m_, n_);
    for (Eigen::Index k = 0; k < real_arcs_; ++k) {
      const double f = flow_[static_cast<std::size_t>(k)];
      if (f != 0.0) {
        p.matrix(k / n_, k % n_) = f;
        p.cost += f * cost_(k / n_, k % n_);
      }
    }
    return p;
  }

 private:
  Eigen::Index tail(Eigen::Index arc) const {
    if (arc < real_arcs_) return arc / n_;
    if (arc < real_arcs_ + m_) return arc - real_arcs_;
    return root_;
  }
  Eigen::Index head(Eigen::Index arc) const {
    if (arc < real_arcs_) return m_ + arc % n_;
    if (arc < real_arcs_ + m_) return root_;
    return m_ + (arc - real_arcs_ - m_);
  }
  double arc_cost(Eigen::Index arc) const {
    return arc < real_arcs_ ? cost_(arc / n_, arc % n_) : art_cost_;
  }

  // Recomputes parent pointers, depths and potentials from the tree arc set.
  void rebuild() {
    const auto N = static_cast<std::size_t>(nodes_);
    adj_start_.assign(N + 1, 0);
    for (Eigen::Index a : tree_) {
      ++adj_start_[static_cast<std::size_t>(tail(a)) + 1];
      ++adj_start_[static_cast<std::size_t>(head(a)) + 1];
    }
    for (std::size_t v = 0; v < N; ++v) adj_start_[v + 1] += adj_start_[v];
    adj_.resize(2 * tree_.size());
    std::vector<std::size_t> fill(adj_start_.begin(), adj_start_.end() - 1);
    for (Eigen::Index a : tree_) {
      adj_[fill[static_cast<std::size_t>(tail(a))]++] = a;
      adj_[fill[static_cast<std::size_t>(head(a))]++] = a;
    }
    std::fill(depth_.begin(), depth_.end(), -1);
    queue_.clear();
    queue_.push_back(root_);
    depth_[static_cast<std::size_t>(root_)] = 0;
    pi_[static_cast<std::size_t>(root_)] = 0.0;
    parent_[static_cast<std::size_t>(root_)] = -1;
    for (std::size_t q = 0; q < queue_.size(); ++q) {
      const Eigen::Index v = queue_[q];
      const auto vs = static_cast<std::size_t>(v);
      for (std::size_t e = adj_start_[vs]; e < adj_start_[vs + 1]; ++e) {
        const Eigen::Index a = adj_[e];
        const bool out = tail(a) == v;
        const Eigen::Index w = out ? head(a) : tail(a);
        const auto ws = static_cast<std::size_t>(w);
        if (depth_[ws] >= 0) continue;
        depth_[ws] = depth_[vs] + 1;
        parent_[ws] = v;
        parent_arc_[ws] = a;
        up_[ws] = !out;  // arc w -> v points toward the root
        pi_[ws] = out ? pi_[vs] + arc_cost(a) : pi_[vs] - arc_cost(a);
        queue_.push_back(w);
      }
    }
  }

  double reduced_cost(Eigen::Index arc) const {
    return arc_cost(arc) + pi_[static_cast<std::size_t>(tail(arc))] - pi_[static_cast<std::size_t>(head(arc))];
  }

  // Block search pricing over real arcs.
  Eigen::Index find_entering() {
    if (real_arcs_ == 0) return -1;
    Eigen::Index best = -1;
    double best_rc = -eps_;
    Eigen::Index scanned = 0, in_block = 0;
    Eigen::Index a = next_arc_;
    while (scanned < real_arcs_) {
      const double rc = reduced_cost(a);
      if (rc < best_rc && tree_pos_[static_cast<std::size_t>(a)] < 0) {
        best_rc = rc;
        best = a;
      }
      ++scanned;
      ++in_block;
      a = (a + 1 == real_arcs_) ? 0 : a + 1;
      if (in_block == block_) {
        if (best >= 0) break;
        in_block = 0;
      }
    }
    next_arc_ = a;
    return best;
  }

  void pivot(Eigen::Index enter) {
    const Eigen::Index u = tail(enter), v = head(enter);
    Eigen::Index x = u, y = v;
    while (x != y) {
      if (depth_[static_cast<std::size_t>(x)] >= depth_[static_cast<std::size_t>(y)]) x = parent_[static_cast<std::size_t>(x)];
      else y = parent_[static_cast<std::size_t>(y)];
    }
    const Eigen::Index join = x;

    double delta = std::numeric_limits<double>::infinity();
    Eigen::Index leave = -1;
    // Side of u: flow runs join -> u, so arcs pointing up lose flow.
    for (Eigen::Index w = u; w != join; w = parent_[static_cast<std::size_t>(w)]) {
      const auto ws = static_cast<std::size_t>(w);
      if (up_[ws]) {
        const double f = flow_[static_cast<std::size_t>(parent_arc_[ws])];
        if (f < delta) {
          delta = f;
          leave = parent_arc_[ws];
        }
      }
    }
    // Side of v: flow runs v -> join, so arcs pointing down lose flow.
    for (Eigen::Index w = v; w != join; w = parent_[static_cast<std::size_t>(w)]) {
      const auto ws = static_cast<std::size_t>(w);
      if (!up_[ws]) {
        const double f = flow_[static_cast<std::size_t>(parent_arc_[ws])];
        if (f <= delta) {
          delta = f;
          leave = parent_arc_[ws];
        }
      }
    }
    if (leave < 0) throw std::runtime_error("transport simplex: unbounded cycle");
    delta = std::max(delta, 0.0);

    flow_[static_cast<std::size_t>(enter)] += delta;
    for (Eigen::Index w = u; w != join; w = parent_[static_cast<std::size_t>(w)]) {
      const auto ws = static_cast<std::size_t>(w);
      flow_[static_cast<std::size_t>(parent_arc_[ws])] += up_[ws] ? -delta : delta;
    }
    for (Eigen::Index w = v; w != join; w = parent_[static_cast<std::size_t>(w)]) {
      const auto ws = static_cast<std::size_t>(w);
      flow_[static_cast<std::size_t>(parent_arc_[ws])] += up_[ws] ? delta : -delta;
    }
    flow_[static_cast<std::size_t>(leave)] = 0.0;

    const long pos = tree_pos_[static_cast<std::size_t>(leave)];
    tree_pos_[static_cast<std::size_t>(leave)] = -1;
    tree_[static_cast<std::size_t>(pos)] = enter;
    tree_pos_[static_cast<std::size_t>(enter)] = pos;
    rebuild();
  }

  const Matrix& cost_;
  Eigen::Index m_, n_, nodes_, root_, real_arcs_;
  double art_cost_ = 0.0, eps_ = 0.0;
  std::vector<double> flow_;
  std::vector<Eigen::Index> tree_;
  std::vector<long> tree_pos_;
  std::vector<Eigen::Index> parent_, parent_arc_, queue_, adj_;
  std::vector<char> up_;
  std::vector<long> depth_;
  std::vector<double> pi_;
  std::vector<std::size_t> adj_start_;
  Eigen::Index block_ = 10, next_arc_ = 0;
};

Matrix ground_cost(const Matrix& a, const Matrix& b, int p) {
  Matrix c(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const double sq = (a.row(i) - b.row(j)).squaredNorm();
      c(i, j) = p == 1 ? std::sqrt(sq) : sq;
    }
  return c;
}

}  // namespace

TransportPlan solve_transport(const Matrix& cost, std::span<const double> supply, std::span<const double> demand) {
  if (static_cast<std::size_t>(cost.rows()) != supply.size() || static_cast<std::size_t>(cost.cols()) != demand.size())
    throw std::invalid_argument("solve_transport: cost shape does not match marginals");
  for (double s : supply)
    if (!(s > 0.0)) throw std::invalid_argument("solve_transport: supplies must be positive");
  for (double d : demand)
    if (!(d > 0.0)) throw std::invalid_argument("solve_transport: demands must be positive");
  TransportSimplex ns(cost, supply, demand);
  ns.run();
  return ns.plan();
}

TransportResult exact_wasserstein(const WeightedPointCloud& a, const WeightedPointCloud& b, int p) {
  if (p != 1 && p != 2) throw std::invalid_argument("exact_wasserstein: p must be 1 or 2");
  a.validate();
  b.validate();
  if (a.dim() != b.dim()) throw std::invalid_argument("exact_wasserstein: dimension mismatch");

  std::vector<Eigen::Index> ia, ib;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.masses[i] > 0.0) ia.push_back(static_cast<Eigen::Index>(i));
  for (std::size_t j = 0; j < b.size(); ++j)
    if (b.masses[j] > 0.0) ib.push_back(static_cast<Eigen::Index>(j));
  const WeightedPointCloud na = a.normalized();
  const WeightedPointCloud nb = b.normalized();

  const Matrix cost = ground_cost(na.points, nb.points, p);
  const TransportPlan reduced = solve_transport(cost, na.masses, nb.masses);

  TransportResult r;
  r.plan.matrix = Matrix::Zero(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < ia.size(); ++i)
    for (std::size_t j = 0; j < ib.size(); ++j)
      r.plan.matrix(ia[i], ib[j]) = reduced.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  r.plan.cost = reduced.cost;
  r.distance = reduced.cost;
  return r;
}

double critic_distance_estimate(const MlpModel& critic, const WeightedPointCloud& a, const WeightedPointCloud& b) {
  const WeightedPointCloud na = a.normalized();
  const WeightedPointCloud nb = b.normalized();
  if (na.dim() != critic.spec().input_dim() || nb.dim() != critic.spec().input_dim())
    throw std::invalid_argument("critic_distance_estimate: dimension mismatch");
  const Matrix da = critic.forward(na.points);
  const Matrix db = critic.forward(nb.points);
  double s = 0.0;
  for (std::size_t i = 0; i < na.size(); ++i) s += na.masses[i] * da(static_cast<Eigen::Index>(i), 0);
  for (std::size_t j = 0; j < nb.size(); ++j) s -= nb.masses[j] * db(static_cast<Eigen::Index>(j), 0);
  return s;
}

WeightedPointCloud pushforward_cloud(const MlpModel& classifier, const WeightedPointCloud& a) {
  const WeightedPointCloud na = a.normalized();
  const auto preds = classify_batch(classifier, na.points);
  double mass[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < preds.size(); ++i) mass[preds[i].label] += na.masses[i];
  WeightedPointCloud out;
  std::vector<double> pts;
  for (int label = 0; label < 2; ++label) {
    if (mass[label] > 0.0) {
      pts.push_back(label);
      out.masses.push_back(mass[label]);
    }
  }
  out.points = Eigen::Map<Matrix>(pts.data(), static_cast<Eigen::Index>(pts.size()), 1);
  return out;
}

LipschitzReport verify_lipschitz_bound(const MlpModel& classifier, const WeightedPointCloud& a,
                                       const WeightedPointCloud& b) {
  Matrix all(a.points.rows() + b.points.rows(), a.points.cols());
  all << a.points, b.points;
  LipschitzReport r;
  r.K = empirical_lipschitz(classifier, all);
  r.lhs = exact_wasserstein(pushforward_cloud(classifier, a), pushforward_cloud(classifier, b), 1).distance;
  r.rhs = r.K == 0.0 ? 0.0 : r.K * exact_wasserstein(a, b, 1).distance;
  r.holds = r.lhs <= r.rhs + 1e-9;
  return r;
}

WeightedPointCloud subsample(const WeightedPointCloud& a, std::size_t max_points, std::uint64_t seed) {
  const WeightedPointCloud c = a.normalized();
  if (c.size() <= max_points) return c;
  std::vector<std::size_t> idx(c.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(max_points);
  std::sort(idx.begin(), idx.end());
  WeightedPointCloud out;
  out.points.resize(static_cast<Eigen::Index>(max_points), c.points.cols());
  for (std::size_t k = 0; k < max_points; ++k) {
    out.points.row(static_cast<Eigen::Index>(k)) = c.points.row(static_cast<Eigen::Index>(idx[k]));
    out.masses.push_back(c.masses[idx[k]]);
  }
  return out.normalized();
}

SubsampledDistance subsampled_wasserstein(const WeightedPointCloud& a, const WeightedPointCloud& b, int p,
                                          std::size_t max_points, int repeats, std::uint64_t seed) {
  if (repeats < 1) throw std::invalid_argument("subsampled_wasserstein: repeats must be >= 1");
  SubsampledDistance out;
  out.subsample_size = std::min(max_points, std::max(a.size(), b.size()));
  for (int r = 0; r < repeats; ++r) {
    const std::uint64_t s = seed + 7919ULL * static_cast<std::uint64_t>(r);
    const auto sa = subsample(a, max_points, s);
    const auto sb = subsample(b, max_points, s ^ 0x9e3779b97f4a7c15ULL);
    out.values.push_back(exact_wasserstein(sa, sb, p).distance);
  }
  out.mean = std::accumulate(out.values.begin(), out.values.end(), 0.0) / repeats;
  if (repeats > 1) {
    double ss = 0.0;
    for (double v : out.values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / (repeats - 1));
  }
  return out;
}

std::string distance_report_line(const std::string& phase, int p, double distance, std::size_t subsample_size,
                                 std::uint64_t seed) {
  nlohmann::json j = {{"phase", phase}, {"p", p}, {"distance", distance},
                      {"subsample_size", subsample_size}, {"seed", seed}};
  return j.dump();
}

}  // namespace arw
