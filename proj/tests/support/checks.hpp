#pragma once

// Library-level checks shared by unit and acceptance tests.

#include "arw/adversarial.hpp"
#include "arw/diffcore.hpp"
#include "arw/models.hpp"
#include "arw/otoracle.hpp"
#include "oracles.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace arw::testing {

using diff::Axis;
using diff::NodeId;
using diff::Tape;

using Builder = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

inline double eval_root(const Builder& build, const std::vector<Matrix>& values) {
  Tape t;
  std::vector<NodeId> ids;
  for (const auto& v : values) ids.push_back(t.parameter({v.rows(), v.cols()}));
  const NodeId root = build(t, ids);
  diff::Bindings b;
  for (std::size_t k = 0; k < ids.size(); ++k) b[ids[k]] = values[k];
  t.forward(std::move(b));
  return t.value(root)(0, 0);
}

// Worst relative error between reverse-mode and central-difference gradients.
inline double gradient_error(const Builder& build, const std::vector<Matrix>& values) {
  Tape t;
  std::vector<NodeId> ids;
  for (const auto& v : values) ids.push_back(t.parameter({v.rows(), v.cols()}));
  const NodeId root = build(t, ids);
  diff::Bindings b;
  for (std::size_t k = 0; k < ids.size(); ++k) b[ids[k]] = values[k];
  t.forward(std::move(b));
  const auto grads = t.backward(root, ids);
  double worst = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    auto f = [&](const Matrix& x) {
      auto vals = values;
      vals[k] = x;
      return eval_root(build, vals);
    };
    worst = std::max(worst, max_rel_error(grads[k], fd_gradient(f, values[k])));
  }
  return worst;
}

// Contracts an arbitrary-shaped node to a scalar with fixed random weights.
inline NodeId contract(Tape& t, NodeId x, const Matrix& c) { return t.sum(t.mul(x, t.constant(c))); }

inline Matrix away_from_zero(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  Matrix m = random_matrix(r, c, rng, 0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (sign(rng)) m.data()[i] = -m.data()[i];
  return m;
}

struct OpCase {
  const char* name;
  std::function<Matrix(std::mt19937_64&)> input;
  std::function<NodeId(Tape&, NodeId, NodeId, const Matrix&)> apply;  // (tape, x, y, contraction)
  Eigen::Index out_rows, out_cols;
};

inline std::vector<OpCase> op_cases() {
  auto any = [](std::mt19937_64& r) { return random_matrix(3, 4, r); };
  auto pos = [](std::mt19937_64& r) { return random_matrix(3, 4, r, 0.5, 2.0); };
  auto kink = [](std::mt19937_64& r) { return away_from_zero(3, 4, r); };
  return {
      {"add", any, [](Tape& t, NodeId x, NodeId y, const Matrix&) { return t.add(x, y); }, 3, 4},
      {"mul", any, [](Tape& t, NodeId x, NodeId y, const Matrix&) { return t.mul(x, y); }, 3, 4},
      {"matmul_nt", any, [](Tape& t, NodeId x, NodeId y, const Matrix&) { return t.matmul(x, y, false, true); }, 3, 3},
      {"matmul_tn", any, [](Tape& t, NodeId x, NodeId y, const Matrix&) { return t.matmul(x, y, true, false); }, 4, 4},
      {"relu", kink, [](Tape& t, NodeId x, NodeId y, const Matrix&) { return t.mul(t.relu(x), y); }, 3, 4},
      {"sigmoid", any, [](Tape& t, NodeId x, NodeId y, const Matrix&) { return t.mul(t.sigmoid(x), y); }, 3, 4},
      {"log", pos, [](Tape& t, NodeId x, NodeId y, const Matrix&) { return t.mul(t.log(x), y); }, 3, 4},
      {"square", any, [](Tape& t, NodeId x, NodeId y, const Matrix&) { return t.mul(t.square(x), y); }, 3, 4},
      {"sqrt", pos, [](Tape& t, NodeId x, NodeId y, const Matrix&) { return t.mul(t.sqrt(x), y); }, 3, 4},
      {"reciprocal", pos, [](Tape& t, NodeId x, NodeId y, const Matrix&) { return t.mul(t.reciprocal(x), y); }, 3, 4},
      {"step", kink, [](Tape& t, NodeId x, NodeId y, const Matrix&) { return t.mul(t.step(x), t.square(y)); }, 3, 4},
      {"sum_all", any, [](Tape& t, NodeId x, NodeId y, const Matrix&) { return t.sum(t.mul(x, y), Axis::All); }, 1, 1},
      {"sum_rows", any, [](Tape& t, NodeId x, NodeId y, const Matrix&) { return t.sum(t.mul(x, y), Axis::Rows); }, 3, 1},
      {"sum_cols", any, [](Tape& t, NodeId x, NodeId y, const Matrix&) { return t.sum(t.mul(x, y), Axis::Cols); }, 1, 4},
      {"broadcast_rows",
       any,
       [](Tape& t, NodeId x, NodeId y, const Matrix&) {
         return t.mul(t.broadcast(t.sum(x, Axis::Rows), {3, 4}), y);
       },
       3, 4},
      {"broadcast_cols",
       any,
       [](Tape& t, NodeId x, NodeId y, const Matrix&) {
         return t.mul(t.broadcast(t.sum(x, Axis::Cols), {3, 4}), y);
       },
       3, 4},
      {"broadcast_scalar",
       any,
       [](Tape& t, NodeId x, NodeId y, const Matrix&) { return t.mul(t.broadcast(t.sum(x), {3, 4}), y); },
       3, 4},
      {"scale_sub_mean",
       any,
       [](Tape& t, NodeId x, NodeId y, const Matrix&) {
         return t.mul(t.add_scalar(t.sub(t.scale(x, 2.5), y), 0.3), t.broadcast(t.mean(y), {3, 4}));
       },
       3, 4},
  };
}

// Worst first-order and second-order errors of one op over seeds [0, seeds).
struct OpErrors {
  double first = 0.0, second = 0.0;
};

inline OpErrors op_errors(const OpCase& op, std::uint64_t seeds) {
  OpErrors e;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    std::mt19937_64 rng(seed);
    const Matrix xv = op.input(rng);
    const Matrix yv = random_matrix(3, 4, rng);
    const Matrix c = random_matrix(op.out_rows, op.out_cols, rng);
    const Matrix c2 = random_matrix(3, 4, rng);
    const Builder first = [&](Tape& t, const std::vector<NodeId>& p) {
      return contract(t, op.apply(t, p[0], p[1], c), c);
    };
    e.first = std::max(e.first, gradient_error(first, {xv, yv}));
    // Contract the gradient node itself and differentiate again.
    const Builder second = [&](Tape& t, const std::vector<NodeId>& p) {
      const auto g = t.gradient_as_node(first(t, p), p[0]);
      return contract(t, g, c2);
    };
    e.second = std::max(e.second, gradient_error(second, {xv, yv}));
  }
  return e;
}

// Weighted cross-entropy of a [4, 7, 1] network: tape gradient against
// central differences of the plain forward pass.
inline double weighted_loss_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed + 1000);
  const int n = 6;
  const Matrix x = random_matrix(n, 4, rng, -2.0, 2.0);
  std::vector<int> y(n);
  std::vector<double> w(n);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = coin(rng);
    w[static_cast<std::size_t>(i)] = u(rng);
  }
  MlpModel model = MlpModel::init({{4, 7, 1}, Activation::Sigmoid, seed});

  Tape t;
  const auto in = t.input({n, 4});
  diff::Bindings b{{in, x}};
  const auto g = model.build(t, in, false);
  model.bind(g, b);
  const auto loss = cross_entropy_node(t, g.output, y, w);
  t.forward(std::move(b));
  const auto grads = t.backward(loss, g.params);

  double worst = 0.0;
  const auto params = model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto f = [&](const Matrix& v) {
      MlpModel m = model;
      *m.parameters()[k] = v;
      const Matrix p = m.forward(x);
      return weighted_cross_entropy(std::span<const double>(p.data(), static_cast<std::size_t>(n)), y, w);
    };
    worst = std::max(worst, max_rel_error(grads[k], fd_gradient(f, *params[k])));
  }
  return worst;
}

struct PenaltyCheck {
  double error = 0.0;      // parameter gradient against central differences
  double value_gap = 0.0;  // tape value against gradient_penalty()
};

// Gradient penalty of a [3, 8, 6, 1] critic built by hand on a tape.
inline PenaltyCheck penalty_check(std::uint64_t seed) {
  std::mt19937_64 rng(seed + 5000);
  MlpModel critic = MlpModel::init({{3, 8, 6, 1}, Activation::Identity, seed});
  const Matrix z = random_matrix(5, 3, rng, -2.0, 2.0);

  Tape t;
  const auto in = t.input({z.rows(), z.cols()});
  diff::Bindings b{{in, z}};
  const auto g = critic.build(t, in, false);
  critic.bind(g, b);
  const auto grad = t.gradient_as_node(t.sum(g.output), in);
  const auto norm = t.sqrt(t.add_scalar(t.sum(t.square(grad), Axis::Rows), 1e-12));
  const auto pen = t.mean(t.square(t.add_scalar(norm, -1.0)));
  t.forward(std::move(b));
  PenaltyCheck r;
  r.value_gap = std::abs(t.value(pen)(0, 0) - gradient_penalty(critic, z));
  const auto grads = t.backward(pen, g.params);

  const auto params = critic.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto f = [&](const Matrix& v) {
      MlpModel m = critic;
      *m.parameters()[k] = v;
      return gradient_penalty(m, z);
    };
    r.error = std::max(r.error, max_rel_error(grads[k], fd_gradient(f, *params[k])));
  }
  return r;
}

inline WeightedPointCloud random_cloud(std::size_t n, int dim, std::mt19937_64& rng) {
  return {random_matrix(static_cast<Eigen::Index>(n), dim, rng, -2.0, 2.0), random_masses(n, rng)};
}

inline double marginal_residual(const TransportPlan& plan, const WeightedPointCloud& a, const WeightedPointCloud& b) {
  const auto na = a.normalized(), nb = b.normalized();
  double r = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.masses[i] > 0.0) r = std::max(r, std::abs(plan.matrix.row(static_cast<Eigen::Index>(i)).sum() - na.masses[k++]));
  k = 0;
  for (std::size_t j = 0; j < b.size(); ++j)
    if (b.masses[j] > 0.0) r = std::max(r, std::abs(plan.matrix.col(static_cast<Eigen::Index>(j)).sum() - nb.masses[k++]));
  return r;
}

// Two random clouds of at most max_points rows and a classifier trained on
// their union with random labels.
inline LipschitzReport trained_lipschitz_instance(std::mt19937_64& rng, std::uint64_t model_seed, int max_points) {
  std::uniform_int_distribution<int> size(1, max_points / 2);
  std::bernoulli_distribution coin(0.5);
  const auto a = random_cloud(static_cast<std::size_t>(size(rng)), 2, rng);
  const auto b = random_cloud(static_cast<std::size_t>(size(rng)), 2, rng);
  Matrix x(a.points.rows() + b.points.rows(), 2);
  x << a.points, b.points;
  std::vector<int> y(static_cast<std::size_t>(x.rows()));
  for (auto& v : y) v = coin(rng);
  const std::vector<double> w(y.size(), 1.0);
  Extractor none;
  MlpModel c = MlpModel::init({{2, 8, 1}, Activation::Sigmoid, model_seed});
  SgdMomentum sgd(0.9);
  for (int s = 0; s < 30; ++s) classifier_step(none, c, sgd, x, y, w, 0.5);
  return verify_lipschitz_bound(c, a, b);
}

}  // namespace arw::testing
