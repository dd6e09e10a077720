#include "arw/adversarial.hpp"
#include "arw/otoracle.hpp"
#include "checks.hpp"

#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <random>

using namespace arw;
using testing::marginal_residual;
using testing::random_cloud;
using testing::random_masses;
using testing::random_matrix;

namespace {

WeightedPointCloud cloud1d(std::initializer_list<double> pts, std::initializer_list<double> masses) {
  WeightedPointCloud c;
  c.points.resize(static_cast<Eigen::Index>(pts.size()), 1);
  Eigen::Index i = 0;
  for (double p : pts) c.points(i++, 0) = p;
  c.masses = masses;
  return c;
}

MlpModel threshold_classifier(double cut) {
  // Predicts 1 when the first coordinate exceeds cut.
  MlpModel c = MlpModel::init({{1, 1}, Activation::Sigmoid, 0});
  c.weights()[0](0, 0) = 1.0;
  c.biases()[0](0, 0) = -cut;
  return c;
}

}  // namespace

TEST_CASE("worked transport examples") {
  std::mt19937_64 rng(1);
  const auto a = random_cloud(6, 3, rng);
  const auto self = exact_wasserstein(a, a, 1);
  CHECK(self.distance == doctest::Approx(0.0).scale(1.0));
  CHECK(std::abs(self.distance) <= 1e-12);
  const auto na = a.normalized();
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(self.plan.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) == doctest::Approx(na.masses[i]));

  const auto d0 = cloud1d({0.0}, {1.0}), d3 = cloud1d({3.0}, {1.0});
  CHECK(exact_wasserstein(d0, d3, 1).distance == doctest::Approx(3.0));
  CHECK(exact_wasserstein(d0, d3, 2).distance == doctest::Approx(9.0));

  const auto halves = cloud1d({0.0, 2.0}, {0.5, 0.5}), one = cloud1d({1.0}, {1.0});
  CHECK(exact_wasserstein(halves, one, 1).distance == doctest::Approx(1.0));

  CHECK_THROWS(exact_wasserstein(d0, random_cloud(2, 2, rng), 1));
  CHECK_THROWS(exact_wasserstein(WeightedPointCloud{}, d0, 1));
  CHECK_THROWS(exact_wasserstein(d0, d3, 3));
}

TEST_CASE("zero-mass points are dropped and the plan keeps the caller's indexing") {
  const auto a = cloud1d({0.0, 10.0, 1.0}, {0.5, 0.0, 0.5});
  const auto b = cloud1d({1.0}, {2.0});
  const auto r = exact_wasserstein(a, b, 1);
  CHECK(r.distance == doctest::Approx(0.5));
  CHECK(r.plan.matrix.rows() == 3);
  CHECK(r.plan.matrix(1, 0) == 0.0);
  CHECK(marginal_residual(r.plan, a, b) <= 1e-7);
}

TEST_CASE("network simplex matches spanning-tree enumeration on every size up to 5x5") {
  for (int m = 1; m <= 5; ++m)
    for (int n = 1; n <= 5; ++n)
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        std::mt19937_64 rng(seed * 100 + static_cast<std::uint64_t>(m * 10 + n));
        const auto a = random_cloud(static_cast<std::size_t>(m), 2, rng);
        const auto b = random_cloud(static_cast<std::size_t>(n), 2, rng);
        for (int p : {1, 2}) {
          const auto r = exact_wasserstein(a, b, p);
          testing::TransportEnumerator en(testing::pairwise_cost(a.points, b.points, p), a.masses, b.masses);
          CHECK(r.distance == doctest::Approx(en.minimum()).epsilon(1e-9));
          CHECK(marginal_residual(r.plan, a, b) <= 1e-7);
          CHECK(r.plan.matrix.minCoeff() >= -1e-12);
          CHECK(r.plan.cost == doctest::Approx((r.plan.matrix.array() *
                                                testing::pairwise_cost(a.points, b.points, p).array())
                                                   .sum()));
        }
      }
}

TEST_CASE("symmetry and the triangle inequality on 100 random triples") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> size(1, 12);
  for (int t = 0; t < 100; ++t) {
    const auto a = random_cloud(static_cast<std::size_t>(size(rng)), 3, rng);
    const auto b = random_cloud(static_cast<std::size_t>(size(rng)), 3, rng);
    const auto c = random_cloud(static_cast<std::size_t>(size(rng)), 3, rng);
    const double ab = exact_wasserstein(a, b, 1).distance, ba = exact_wasserstein(b, a, 1).distance;
    const double bc = exact_wasserstein(b, c, 1).distance, ac = exact_wasserstein(a, c, 1).distance;
    CHECK(std::abs(ab - ba) <= 1e-7);
    CHECK(ac <= ab + bc + 1e-7);
  }
}

TEST_CASE("larger clouds keep marginals and agree with one-dimensional sorting") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 5; ++t) {
    const std::size_t n = 300;
    Matrix x = random_matrix(n, 1, rng, -3, 3), y = random_matrix(n, 1, rng, -1, 5);
    const auto a = WeightedPointCloud::uniform(x), b = WeightedPointCloud::uniform(y);
    const auto r = exact_wasserstein(a, b, 1);
    CHECK(marginal_residual(r.plan, a, b) <= 1e-7);
    std::vector<double> xs(x.data(), x.data() + n), ys(y.data(), y.data() + n);
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    double sorted = 0.0;
    for (std::size_t i = 0; i < n; ++i) sorted += std::abs(xs[i] - ys[i]) / static_cast<double>(n);
    CHECK(r.distance == doctest::Approx(sorted).epsilon(1e-9));
  }
}

TEST_CASE("critic distance estimates") {
  std::mt19937_64 rng(2);
  const auto a = random_cloud(10, 2, rng), b = random_cloud(12, 2, rng);
  MlpModel zero = MlpModel::init({{2, 8, 1}, Activation::Identity, 0});
  for (auto& w : zero.weights()) w.setZero();
  CHECK(critic_distance_estimate(zero, a, b) == 0.0);
  const MlpModel d = MlpModel::init({{2, 8, 1}, Activation::Identity, 5});
  CHECK(std::abs(critic_distance_estimate(d, a, a)) <= 1e-12);
}

TEST_CASE("a trained critic estimates W1 of separated Gaussians within 25%") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 0.5);
  const Eigen::Index n = 256;
  Matrix xa(n, 2), xb(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    xa(i, 0) = 3.0 + g(rng);
    xa(i, 1) = g(rng);
    xb(i, 0) = g(rng);
    xb(i, 1) = 1.0 + g(rng);
  }
  const auto a = WeightedPointCloud::uniform(xa), b = WeightedPointCloud::uniform(xb);
  const double exact = exact_wasserstein(a, b, 1).distance;

  MlpModel critic = MlpModel::init({{2, 64, 32, 1}, Activation::Identity, 3});
  Adam adam(1e-3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> eps(static_cast<std::size_t>(n));
  for (int step = 0; step < 1500; ++step) {
    for (auto& e : eps) e = u(rng);
    critic_step(critic, adam, xa, xb, eps, 10.0);
  }
  const double est = critic_distance_estimate(critic, a, b);
  INFO("exact " << exact << " estimate " << est);
  CHECK(std::abs(est - exact) <= 0.25 * exact);
}

TEST_CASE("push-forward clouds") {
  const auto c = cloud1d({0.0, 1.0, 2.0, 3.0}, {1, 1, 1, 1});
  const auto pf = pushforward_cloud(threshold_classifier(0.5), c);
  REQUIRE(pf.size() == 2);
  CHECK(pf.points(0, 0) == 0.0);
  CHECK(pf.masses[0] == doctest::Approx(0.25));
  CHECK(pf.points(1, 0) == 1.0);
  CHECK(pf.masses[1] == doctest::Approx(0.75));

  const auto constant = pushforward_cloud(threshold_classifier(-100.0), c);
  REQUIRE(constant.size() == 1);
  CHECK(constant.masses[0] == doctest::Approx(1.0));

  const auto other = cloud1d({5.0, -3.0, 0.7, 9.0}, {2, 2, 2, 2});
  const auto pa = pushforward_cloud(threshold_classifier(0.5), c);
  const auto pb = pushforward_cloud(threshold_classifier(0.5), other);
  CHECK(exact_wasserstein(pa, pb, 1).distance == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("Lipschitz bound examples") {
  const auto a = cloud1d({1.0, 2.0}, {1, 1}), b = cloud1d({3.0}, {1});
  const auto same = verify_lipschitz_bound(threshold_classifier(-10.0), a, b);
  CHECK(same.K == 0.0);
  CHECK(same.lhs == doctest::Approx(0.0).scale(1.0));
  CHECK(same.holds);

  const auto z = cloud1d({0.0}, {1}), z2 = cloud1d({0.5}, {1});
  const auto tight = verify_lipschitz_bound(threshold_classifier(0.25), z, z2);
  CHECK(tight.K == doctest::Approx(2.0));
  CHECK(tight.lhs == doctest::Approx(1.0));
  CHECK(tight.rhs == doctest::Approx(1.0));
  CHECK(tight.holds);
}

TEST_CASE("Lipschitz bound holds on random trained classifiers") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 30; ++t) CHECK(testing::trained_lipschitz_instance(rng, static_cast<std::uint64_t>(t), 16).holds);
}

TEST_CASE("subsampling and the distance report line") {
  std::mt19937_64 rng(8);
  const auto a = random_cloud(40, 2, rng);
  const auto s = subsample(a, 10, 3);
  CHECK(s.size() == 10);
  double total = 0.0;
  for (double m : s.masses) total += m;
  CHECK(total == doctest::Approx(1.0));
  CHECK(subsample(a, 100, 3).size() == 40);

  const auto r1 = subsampled_wasserstein(a, a, 1, 10, 5, 1);
  const auto r2 = subsampled_wasserstein(a, a, 1, 10, 5, 1);
  CHECK(r1.values == r2.values);
  CHECK(r1.values.size() == 5);
  CHECK(r1.subsample_size == 10);

  const auto j = nlohmann::json::parse(distance_report_line("before", 1, 2.5, 512, 7));
  CHECK(j.at("phase") == "before");
  CHECK(j.at("p") == 1);
  CHECK(j.at("distance") == 2.5);
  CHECK(j.at("subsample_size") == 512);
  CHECK(j.at("seed") == 7);
}
