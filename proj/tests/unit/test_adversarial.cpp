#include "arw/adversarial.hpp"
#include "arw/experiment.hpp"
#include "arw/otoracle.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

using namespace arw;
using testing::random_matrix;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 3;
  c.batch_majority = 40;
  c.batch_minority = 20;
  c.critic_batch = 20;
  c.classifier_hidden = {8};
  c.critic_hidden = {16, 16};
  c.lr_classifier = 0.05;
  c.T = 2.0;
  c.seed = 4;
  return c;
}

Dataset toy(long n_p, long n_u, std::uint64_t seed = 1) {
  SyntheticParams p;
  p.n_p = n_p;
  p.n_u = n_u;
  p.seed = seed;
  return make_synthetic(p);
}

Matrix group_rows(const Dataset& d, int s) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < d.n(); ++i)
    if (d.sensitive[i] == s) rows.push_back(static_cast<Eigen::Index>(i));
  return d.features(rows, Eigen::all);
}

MlpModel linear_critic(std::vector<double> w) {
  MlpModel m = MlpModel::init({{static_cast<int>(w.size()), 1}, Activation::Identity, 0});
  for (std::size_t i = 0; i < w.size(); ++i) m.weights()[0](0, static_cast<Eigen::Index>(i)) = w[i];
  return m;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k);
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  CHECK(lr_schedule(0.0, 0.01) == doctest::Approx(0.01));
  CHECK(lr_schedule(1.0, 0.01) == doctest::Approx(0.01 * std::pow(11.0, -0.75)).epsilon(1e-12));
  CHECK(lr_schedule(1.0, 0.01) == doctest::Approx(0.001658).epsilon(1e-3));
  CHECK(lr_schedule(0.5, 0.01) == doctest::Approx(0.002610).epsilon(1e-3));
  double prev = 1.0;
  for (double p = 0.0; p <= 1.0; p += 0.05) {
    CHECK(lr_schedule(p, 0.01) <= prev);
    prev = lr_schedule(p, 0.01);
  }
  CHECK_THROWS(lr_schedule(-0.1, 0.01));
  CHECK_THROWS(lr_schedule(1.1, 0.01));
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.T = -1.0;
  CHECK_THROWS(c.validate());
  c = TrainConfig{};
  c.batch_majority = 0;
  CHECK_THROWS(c.validate());
  c = TrainConfig{};
  c.distance = DistanceKind::Mmd;
  c.reweight_target = ReweightTarget::Both;
  CHECK_THROWS(c.validate());
  CHECK(parse_distance("mmd") == DistanceKind::Mmd);
  CHECK(parse_target("both") == ReweightTarget::Both);
  CHECK_THROWS(parse_target("all"));
}

TEST_CASE("batch cursor visits every item once per pass") {
  BatchCursor c({0, 1, 2, 3, 4, 5, 6});
  std::mt19937_64 rng(1);
  auto a = c.next(4, rng);
  auto b = c.next(3, rng);
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  CHECK(a == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
  CHECK(c.next(10, rng).size() == 10);
  BatchCursor empty;
  CHECK_THROWS(empty.next(1, rng));
}

TEST_CASE("classifier round with zero learning rate leaves parameters unchanged") {
  const Dataset d = toy(90, 30);
  auto cfg = small_config();
  cfg.lr_classifier = 0.0;
  TrainState s = init_state(d, cfg);
  const MlpModel before = s.classifier;
  classifier_round(s, d, cfg);
  CHECK(s.classifier == before);
  CHECK(s.loss_history.size() == 1);
}

TEST_CASE("a single step on separable data decreases the loss") {
  Matrix x(8, 2);
  x << -2, -1, -1.5, -2, -1, -1.2, -2.5, -0.5, 2, 1, 1.5, 2, 1, 1.2, 2.5, 0.5;
  const std::vector<int> y{0, 0, 0, 0, 1, 1, 1, 1};
  const std::vector<double> w(8, 1.0);
  Extractor none;
  MlpModel c = MlpModel::init({{2, 4, 1}, Activation::Sigmoid, 2});
  SgdMomentum sgd(0.9);
  const double l0 = classifier_step(none, c, sgd, x, y, w, 0.1);
  const Matrix p = c.forward(x);
  const double l1 = weighted_cross_entropy(std::span<const double>(p.data(), 8), y, w) / 8.0;
  CHECK(l1 < l0);
}

TEST_CASE("classifier tensors take ten times the extractor rate") {
  Matrix x(4, 3);
  x << 1, 2, 3, -1, 0.5, 2, 0, -1, 1, 2, 2, -2;
  const std::vector<int> y{1, 0, 1, 0};
  const std::vector<double> w{1, 2, 1, 0.5};
  Extractor f = MlpModel::init({{3, 5}, Activation::Relu, 1});
  MlpModel c = MlpModel::init({{5, 1}, Activation::Sigmoid, 2});
  const MlpModel f0 = *f, c0 = c;

  diff::Tape t;
  const auto in = t.input({4, 3});
  diff::Bindings b{{in, x}};
  const auto gf = f->build(t, in, true);
  f->bind(gf, b);
  const auto gc = c.build(t, gf.output, false);
  c.bind(gc, b);
  std::vector<double> coeff(4);
  for (int i = 0; i < 4; ++i) coeff[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)] / 4.5;
  const auto loss = cross_entropy_node(t, gc.output, y, coeff);
  t.forward(std::move(b));
  const auto gw = t.backward(loss, std::vector<diff::NodeId>{gf.params[0], gc.params[0]});

  SgdMomentum sgd(0.9);
  const double lr = 0.01;
  classifier_step(f, c, sgd, x, y, w, lr);
  CHECK(((f0.weights()[0] - f->weights()[0]) - lr * gw[0]).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(((c0.weights()[0] - c.weights()[0]) - 10.0 * lr * gw[1]).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("uniform weights on balanced groups reproduce the unweighted trainer exactly") {
  const Dataset d = toy(60, 60);
  auto cfg = small_config();
  cfg.weight_mode = WeightMode::Uniform;
  const TrainState a = train(d, cfg);
  cfg.weight_mode = WeightMode::Ones;
  const TrainState b = train(d, cfg);
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.classifier == b.classifier);
}

TEST_CASE("critic ascent without penalty increases the objective") {
  std::mt19937_64 rng(3);
  const Matrix zp = random_matrix(32, 2, rng, 0.0, 2.0), zu = random_matrix(32, 2, rng, -2.0, 0.0);
  MlpModel critic = MlpModel::init({{2, 16, 1}, Activation::Identity, 5});
  Adam adam(1e-2);
  const std::vector<double> eps(32, 0.5), ones(32, 1.0);
  const double before = critic_objective(critic, zp, ones, zu, ones);
  const auto r = critic_step(critic, adam, zp, zu, eps, 0.0);
  CHECK(r.objective == doctest::Approx(before));
  CHECK(critic_objective(critic, zp, ones, zu, ones) > before);
}

TEST_CASE("identical groups leave the trained critic estimate near zero") {
  std::mt19937_64 rng(4);
  const Matrix z = random_matrix(64, 2, rng, -1.0, 1.0);
  MlpModel critic = MlpModel::init({{2, 32, 1}, Activation::Identity, 6});
  Adam adam(1e-3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> eps(64);
  for (int step = 0; step < 300; ++step) {
    for (auto& e : eps) e = u(rng);
    critic_step(critic, adam, z, z, eps, 10.0);
  }
  const auto c = WeightedPointCloud::uniform(z);
  CHECK(std::abs(critic_distance_estimate(critic, c, c)) <= 0.05);
  const std::vector<double> ones(64, 1.0);
  CHECK(std::abs(critic_objective(critic, z, ones, z, ones)) <= 0.05);
}

TEST_CASE("gradient penalty of a unit-norm linear critic is zero") {
  std::mt19937_64 rng(5);
  const MlpModel lin = linear_critic({0.6, -0.8});
  CHECK(gradient_penalty(lin, random_matrix(10, 2, rng)) == doctest::Approx(0.0).scale(1.0));
  const MlpModel steep = linear_critic({3.0, 0.0});
  CHECK(gradient_penalty(steep, random_matrix(10, 2, rng)) == doctest::Approx(4.0));
}

TEST_CASE("weighted critic batches use the weights as coefficients") {
  std::mt19937_64 rng(6);
  const Matrix zp = random_matrix(50, 2, rng), zu = random_matrix(20, 2, rng);
  std::vector<double> w(50, 0.0);
  w[7] = 20.0;  // all mass on one row
  const std::vector<double> v(20, 1.0);
  MlpModel critic = linear_critic({1.0, 0.0});
  Adam adam(0.0);
  auto cfg = small_config();
  cfg.critic_batch = 0;
  std::mt19937_64 r2(1);
  const auto step = weighted_critic_step(critic, adam, r2, zp, w, zu, v, cfg);
  const double expected = zp(7, 0) - zu.col(0).mean();
  CHECK(step.objective == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("reweight round examples") {
  const Dataset d = toy(40, 10);
  auto cfg = small_config();
  TrainState s = init_state(d, cfg);
  const Matrix zp = group_rows(d, 1), zu = group_rows(d, 0);

  MlpModel constant = linear_critic({0.0, 0.0});
  constant.biases()[0](0, 0) = 3.0;
  s.critic = constant;
  reweight_round(s, zp, zu, cfg);
  for (double w : s.weights.values) CHECK(w == doctest::Approx(10.0 / 40.0));

  s.critic = linear_critic({1.0, 0.0});
  reweight_round(s, zp, zu, cfg);
  CHECK(s.weights.feasible());
  std::vector<std::size_t> order(40);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return zp(static_cast<Eigen::Index>(a), 0) < zp(static_cast<Eigen::Index>(b), 0); });
  for (std::size_t k = 1; k < order.size(); ++k) CHECK(s.weights.values[order[k]] <= s.weights.values[order[k - 1]] + 1e-12);
  const auto oracle = solve_weights(std::vector<double>(zp.col(0).data(), zp.col(0).data() + 40), 10, cfg.T);
  CHECK(s.weights.values == oracle.values);

  cfg.T = 0.0;
  reweight_round(s, zp, zu, cfg);
  for (double w : s.weights.values) CHECK(w == doctest::Approx(10.0 / 40.0));
}

TEST_CASE("minority and alternating targets") {
  const Dataset d = toy(40, 10);
  auto cfg = small_config();
  cfg.reweight_target = ReweightTarget::Minority;
  TrainState s = init_state(d, cfg);
  const Matrix zp = group_rows(d, 1), zu = group_rows(d, 0);
  s.critic = linear_critic({1.0, 0.0});
  const auto w0 = s.weights.values;
  reweight_round(s, zp, zu, cfg);
  CHECK(s.weights.values == w0);
  CHECK(s.minority_weights.feasible());
  // Minority mass moves toward high critic scores (the majority side).
  std::vector<double> neg(10);
  for (int i = 0; i < 10; ++i) neg[static_cast<std::size_t>(i)] = -zu(i, 0);
  CHECK(s.minority_weights.values == solve_weights(neg, 10, cfg.T).values);

  cfg.reweight_target = ReweightTarget::Both;
  TrainState b = init_state(d, cfg);
  b.critic = linear_critic({1.0, 0.0});
  const auto v0 = b.minority_weights.values;
  reweight_round(b, zp, zu, cfg);
  CHECK(b.weights.values != w0);
  CHECK(b.minority_weights.values == v0);
  b.round = 1;
  const auto w1 = b.weights.values;
  reweight_round(b, zp, zu, cfg);
  CHECK(b.weights.values == w1);
  CHECK(b.minority_weights.values != v0);
}

TEST_CASE("MMD examples") {
  std::mt19937_64 rng(7);
  const Matrix a = random_matrix(6, 2, rng);
  const std::vector<double> u(6, 1.0);
  CHECK(mmd_distance(a, u, a, 1.0) == doctest::Approx(0.0).scale(1.0));
  Matrix x(1, 1), y(1, 1);
  x << 0.0;
  y << 1.0;
  CHECK(mmd_distance(x, std::vector<double>{1.0}, y, 1.0) == doctest::Approx(2.0 - 2.0 * std::exp(-0.5)).epsilon(1e-12));
  CHECK(mmd_distance(x, std::vector<double>{1.0}, y, 1.0) == doctest::Approx(0.786939).epsilon(1e-6));
  CHECK_THROWS(mmd_distance(x, std::vector<double>{1.0}, y, 0.0));
  std::uniform_real_distribution<double> pos(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const Matrix p = random_matrix(5, 3, rng), q = random_matrix(7, 3, rng);
    std::vector<double> w(5);
    for (auto& e : w) e = pos(rng) + 1e-3;
    CHECK(mmd_distance(p, w, q, 0.5 + pos(rng)) >= -1e-12);
  }
}

TEST_CASE("MMD reweighting stays feasible and lowers the discrepancy") {
  const Dataset d = toy(200, 50);
  const Matrix zp = group_rows(d, 1), zu = group_rows(d, 0);
  const auto start = uniform_weights(200, 50, 2.0);
  const double sigma = median_heuristic_sigma(zp, zu, 1);
  const auto w = mmd_reweight(zp, zu, start, sigma, 20, 3000, 256, 1);
  CHECK(w.feasibility_residual() <= 1e-8);
  CHECK(mmd_distance(zp, w.values, zu, sigma) < mmd_distance(zp, start.values, zu, sigma));
}

TEST_CASE("zero epochs return the initial state; runs are deterministic") {
  const Dataset d = toy(90, 30);
  auto cfg = small_config();
  cfg.epochs = 0;
  const TrainState a = train(d, cfg);
  const TrainState init = init_state(d, cfg);
  CHECK(a.classifier == init.classifier);
  CHECK(a.critic == init.critic);
  CHECK(a.weights.values == init.weights.values);
  CHECK(a.loss_history.empty());

  cfg.epochs = 4;
  const TrainState x = train(d, cfg), y = train(d, cfg);
  CHECK(x.loss_history == y.loss_history);
  CHECK(x.weights.values == y.weights.values);
  CHECK(x.critic == y.critic);
}

TEST_CASE("weights stay feasible and the minority stays at one under the majority target") {
  const Dataset d = toy(120, 40);
  auto cfg = small_config();
  cfg.epochs = 6;
  int rounds = 0;
  train(d, cfg, [&](const TrainState& s) {
    ++rounds;
    CHECK(s.weights.feasibility_residual() <= kConstraintTolerance);
    for (double v : s.minority_weights.values) CHECK(v == 1.0);
  });
  CHECK(rounds == 6);
}

TEST_CASE("round log format") {
  std::vector<RoundLog> rows(2);
  rows[1].round = 1;
  rows[1].w1_exact_subsample = 0.5;
  std::ostringstream out;
  write_round_log(out, rows);
  const std::string s = out.str();
  CHECK(s.rfind("round,weighted_loss,critic_objective,w1_exact_subsample,w_min,w_max,w_entropy\n", 0) == 0);
  CHECK(s.find("\n0,0,0,,0,0,0\n") != std::string::npos);
  CHECK(s.find("\n1,0,0,0.5,0,0,0\n") != std::string::npos);
}

TEST_CASE("shifted Gaussians: weighted W1 collapses" * doctest::test_suite("benchmark")) {
  SyntheticParams p;
  p.n_p = 1500;
  p.n_u = 500;
  p.spread = 0.25;
  p.overlap = 0.2;
  p.seed = 11;
  const Dataset d = make_synthetic(p);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_majority = 300;
  cfg.batch_minority = 100;
  cfg.critic_batch = 200;
  cfg.lr_classifier = 0.1;
  cfg.T = 2.0;
  cfg.seed = 1;
  const double before = audit_w1(init_state(d, cfg), d, 512, 3);
  const double after = audit_w1(train(d, cfg), d, 512, 3);
  INFO("before " << before << " after " << after);
  CHECK(before >= 3.0);
  CHECK(after <= 0.1 * before);
}

// Each round's critic is scored against the weights it was trained on, and
// compared with the exact distance under those same weights.
TEST_CASE("critic estimate and exact W1 decrease together over rounds" * doctest::test_suite("benchmark")) {
  auto m = read_config_file(std::string(ARW_CONFIG_DIR) + "/shifted_gaussian.ini");
  const ExperimentConfig ec = experiment_from_config(m, ARW_CONFIG_DIR);
  const Dataset data = load_dataset(ec.dataset);
  const Split sp = split(data, ec.dataset.test_fraction, ec.base_seed);
  TrainConfig cfg = ec.train;
  cfg.seed = ec.base_seed;
  const Dataset& d = sp.train;
  const Matrix xp = group_rows(d, 1), xu = group_rows(d, 0);
  const std::vector<double> ones(static_cast<std::size_t>(xu.rows()), 1.0);

  TrainState init = init_state(d, cfg);
  std::vector<double> prev = init.weights.values;
  auto exact_at = [&](const TrainState& st, const std::vector<double>& w, std::uint64_t seed) {
    return subsampled_wasserstein(WeightedPointCloud{embed(st, xp), w}, WeightedPointCloud::uniform(embed(st, xu)), 1,
                                  512, 5, seed)
        .mean;
  };
  double prev_exact = exact_at(init, prev, 0);
  std::vector<double> estimates, exact;
  train(d, cfg, [&](const TrainState& st) {
    estimates.push_back(critic_objective(st.critic, embed(st, xp), prev, embed(st, xu), ones));
    exact.push_back(prev_exact);
    prev = st.weights.values;
    prev_exact = exact_at(st, prev, static_cast<std::uint64_t>(st.round));
  });
  const double rho = spearman(estimates, exact);
  INFO("first exact " << exact.front() << " last exact " << exact.back() << " first estimate " << estimates.front()
                      << " last estimate " << estimates.back() << " spearman " << rho);
  CHECK(rho > 0.0);
}
