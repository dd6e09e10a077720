#include "arw/models.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace arw;
using testing::random_matrix;

namespace {

MlpModel single_unit(std::vector<double> w, double b, Activation out) {
  MlpModel m = MlpModel::init({{static_cast<int>(w.size()), 1}, out, 0});
  for (std::size_t i = 0; i < w.size(); ++i) m.weights()[0](0, static_cast<Eigen::Index>(i)) = w[i];
  m.biases()[0](0, 0) = b;
  return m;
}

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) x(i++) = e;
  return x;
}

}  // namespace

TEST_CASE("initialization is reproducible and shaped by the spec") {
  const MlpModel a = MlpModel::init({{4, 1}, Activation::Sigmoid, 7});
  const MlpModel b = MlpModel::init({{4, 1}, Activation::Sigmoid, 7});
  CHECK(a == b);
  CHECK(a.weights()[0] == b.weights()[0]);

  const MlpModel m = MlpModel::init({{4, 8, 1}, Activation::Sigmoid, 1});
  REQUIRE(m.weights().size() == 2);
  CHECK(m.weights()[0].rows() == 8);
  CHECK(m.weights()[0].cols() == 4);
  CHECK(m.weights()[1].rows() == 1);
  CHECK(m.weights()[1].cols() == 8);
  CHECK(m.biases()[0].size() == 8);
  CHECK(m.biases()[1].size() == 1);
  CHECK(m.biases()[0].isZero());
  const double bound = std::sqrt(6.0 / 4.0);
  CHECK(m.weights()[0].cwiseAbs().maxCoeff() <= bound);
  CHECK(m.parameter_count() == 8 * 4 + 8 + 8 + 1);

  CHECK_THROWS_AS(MlpModel::init({{4, 0, 1}, Activation::Sigmoid, 0}), std::invalid_argument);
  CHECK_THROWS_AS(MlpModel::init({{4}, Activation::Sigmoid, 0}), std::invalid_argument);
}

TEST_CASE("identity and zero extractors") {
  const Extractor none;
  const Vector x = vec({1, 2, 3});
  CHECK(extract(none, x) == x);

  MlpModel zero = MlpModel::init({{3, 5}, Activation::Relu, 4});
  zero.weights()[0].setZero();
  const Extractor f = zero;
  CHECK(extract(f, vec({-4, 0.5, 9})).isZero());
}

TEST_CASE("a seeded extractor matches an independent affine-relu evaluation") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const MlpModel m = MlpModel::init({{5, 6, 4}, Activation::Relu, seed});
    std::mt19937_64 rng(seed);
    const Matrix x = random_matrix(1, 5, rng, -2.0, 2.0);
    Eigen::VectorXd h = x.row(0).transpose();
    for (std::size_t l = 0; l < m.weights().size(); ++l) {
      Eigen::VectorXd next = m.weights()[l] * h + m.biases()[l].row(0).transpose();
      for (Eigen::Index i = 0; i < next.size(); ++i) next(i) = std::max(0.0, next(i));
      h = next;
    }
    const Vector z = extract(Extractor(m), x.row(0).transpose());
    CHECK((z - h).cwiseAbs().maxCoeff() <= 1e-12);
  }
  const MlpModel m = MlpModel::init({{5, 4}, Activation::Relu, 0});
  CHECK_THROWS(extract(Extractor(m), vec({1, 2})));
}

TEST_CASE("classify applies a sigmoid and thresholds at one half") {
  const MlpModel c = single_unit({1.0}, 0.0, Activation::Sigmoid);
  const auto p0 = classify(c, vec({0.0}));
  CHECK(p0.probability == doctest::Approx(0.5));
  CHECK(p0.label == 1);
  const auto big = classify(c, vec({1e3}));
  CHECK(big.probability == doctest::Approx(1.0));
  CHECK(big.label == 1);
  const auto neg = classify(c, vec({-2.0}));
  CHECK(neg.probability == doctest::Approx(1.0 / (1.0 + std::exp(2.0))).epsilon(1e-12));
  CHECK(neg.probability == doctest::Approx(0.119203).epsilon(1e-5));
  CHECK(neg.label == 0);
  CHECK_THROWS(classify(c, vec({1.0, 2.0})));

  double prev = -1.0;
  for (double logit = -30; logit <= 30; logit += 0.5) {
    const double p = classify(c, vec({logit})).probability;
    CHECK(p >= prev);
    prev = p;
  }
}

TEST_CASE("weighted cross-entropy") {
  const std::vector<double> p1{0.5};
  const std::vector<int> y1{1};
  const std::vector<double> w1{1.0};
  CHECK(weighted_cross_entropy(p1, y1, w1) == doctest::Approx(0.693147).epsilon(1e-6));

  const std::vector<double> p2{0.9, 0.1};
  const std::vector<int> y2{1, 0};
  const std::vector<double> zero{0.0, 0.0};
  CHECK(weighted_cross_entropy(p2, y2, zero) == 0.0);

  const std::vector<double> p3{0.8, 0.3};
  const std::vector<double> w3{2.0, 1.0};
  CHECK(weighted_cross_entropy(p3, y2, w3) == doctest::Approx(-2 * std::log(0.8) - std::log(0.7)).epsilon(1e-12));
  CHECK(weighted_cross_entropy(p3, y2, w3) == doctest::Approx(0.802962).epsilon(1e-6));

  const std::vector<double> neg{1.0, -1.0};
  CHECK_THROWS_AS(weighted_cross_entropy(p3, y2, neg), std::invalid_argument);
  CHECK_THROWS_AS(weighted_cross_entropy(p1, y2, w3), std::invalid_argument);

  const std::vector<double> sat{0.0};
  CHECK(std::isfinite(weighted_cross_entropy(sat, y1, w1)));
  CHECK(weighted_cross_entropy(sat, y1, w1) == doctest::Approx(-std::log(kProbabilityClamp)));
}

TEST_CASE("weighted cross-entropy is linear in the weights") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.01, 0.99), w(0.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> p(10), a(10), b(10), s(10);
    std::vector<int> y(10);
    for (int i = 0; i < 10; ++i) {
      p[i] = u(rng);
      y[i] = i % 2;
      a[i] = w(rng);
      b[i] = w(rng);
      s[i] = a[i] + b[i];
    }
    CHECK(weighted_cross_entropy(p, y, s) ==
          doctest::Approx(weighted_cross_entropy(p, y, a) + weighted_cross_entropy(p, y, b)).epsilon(1e-12));
  }
}

TEST_CASE("critic scores") {
  MlpModel zero = MlpModel::init({{2, 8, 1}, Activation::Identity, 3});
  for (auto& w : zero.weights()) w.setZero();
  CHECK(critic_score(zero, vec({5, -7})) == 0.0);

  const MlpModel lin = single_unit({1.0, -1.0}, 0.0, Activation::Identity);
  CHECK(critic_score(lin, vec({3, 1})) == doctest::Approx(2.0));

  const MlpModel d = MlpModel::init({{2, 16, 1}, Activation::Identity, 9});
  CHECK(critic_score(d, vec({0.3, 0.1})) == critic_score(d, vec({0.3, 0.1})));
  CHECK_THROWS(critic_score(single_unit({1.0, 1.0}, 0.0, Activation::Sigmoid), vec({0, 0})));
}

TEST_CASE("extractor and classifier gradients match central differences") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const MlpModel f = MlpModel::init({{3, 5}, Activation::Relu, seed});
    const MlpModel c = MlpModel::init({{5, 4, 1}, Activation::Sigmoid, seed + 100});
    const Matrix x = random_matrix(4, 3, rng, -2, 2);
    const std::vector<int> y{0, 1, 1, 0};
    const std::vector<double> w{0.5, 1.0, 2.0, 0.25};

    diff::Tape t;
    const auto in = t.input({4, 3});
    diff::Bindings b{{in, x}};
    const auto gf = f.build(t, in, true);
    f.bind(gf, b);
    const auto gc = c.build(t, gf.output, false);
    c.bind(gc, b);
    const auto loss = cross_entropy_node(t, gc.output, y, w);
    t.forward(std::move(b));
    std::vector<diff::NodeId> ids = gf.params;
    ids.insert(ids.end(), gc.params.begin(), gc.params.end());
    const auto grads = t.backward(loss, ids);

    auto value = [&](const MlpModel& ff, const MlpModel& cc) {
      const Matrix p = cc.forward(ff.forward(x));
      return weighted_cross_entropy(std::span<const double>(p.data(), 4), y, w);
    };
    MlpModel fm = f, cm = c;
    const auto fp = fm.parameters();
    const auto cp = cm.parameters();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Matrix* target = k < fp.size() ? fp[k] : cp[k - fp.size()];
      const Matrix keep = *target;
      auto fn = [&](const Matrix& v) {
        *target = v;
        const double r = value(fm, cm);
        *target = keep;
        return r;
      };
      worst = std::max(worst, testing::max_rel_error(grads[k], testing::fd_gradient(fn, keep)));
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("checkpoints round-trip exactly") {
  const MlpModel m = MlpModel::init({{3, 4, 1}, Activation::Sigmoid, 21});
  CHECK(mlp_from_json(to_json(m)) == m);
  const auto path = std::filesystem::temp_directory_path() / "arw_model_roundtrip.json";
  save_model(m, path.string());
  CHECK(load_model(path.string()) == m);
  std::filesystem::remove(path);
  CHECK_THROWS(mlp_from_json("{\"format\": \"other\"}"));
}
