#include "arw/adversarial.hpp"

#include "arw/otoracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace arw {

const char* distance_name(DistanceKind d) { return d == DistanceKind::Mmd ? "mmd" : "wasserstein"; }

DistanceKind parse_distance(const std::string& s) {
  if (s == "wasserstein") return DistanceKind::Wasserstein;
  if (s == "mmd") return DistanceKind::Mmd;
  throw std::invalid_argument("unknown distance '" + s + "'");
}

const char* target_name(ReweightTarget t) {
  switch (t) {
    case ReweightTarget::Majority: return "majority";
    case ReweightTarget::Minority: return "minority";
    case ReweightTarget::Both: return "both";
  }
  return "?";
}

ReweightTarget parse_target(const std::string& s) {
  if (s == "majority") return ReweightTarget::Majority;
  if (s == "minority") return ReweightTarget::Minority;
  if (s == "both") return ReweightTarget::Both;
  throw std::invalid_argument("unknown reweight target '" + s + "'");
}

void TrainConfig::validate() const {
  if (steps_classifier_per_round < 0) throw std::invalid_argument("steps_classifier_per_round must be >= 0");
  if (critic_steps_per_round < 1) throw std::invalid_argument("critic_steps_per_round must be positive");
  if (batch_majority < 1 || batch_minority < 1) throw std::invalid_argument("batch sizes must be positive");
  if (critic_batch < 0) throw std::invalid_argument("critic_batch must be >= 0");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (!(lr_classifier >= 0.0) || !(lr_critic >= 0.0)) throw std::invalid_argument("learning rates must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0,1)");
  if (!(gp_coefficient >= 0.0)) throw std::invalid_argument("gp_coefficient must be >= 0");
  if (!(T >= 0.0)) throw std::invalid_argument("T must be >= 0");
  if (distance == DistanceKind::Mmd && reweight_target != ReweightTarget::Majority)
    throw std::invalid_argument("the mmd arm only reweights the majority group");
  if (mmd_sigma < 0.0) throw std::invalid_argument("mmd_sigma must be >= 0");
  if (mmd_iterations < 1 || mmd_features < 1) throw std::invalid_argument("mmd iterations/features must be positive");
  if (audit_every < 0 || audit_points < 2) throw std::invalid_argument("bad audit settings");
  for (const auto* v : {&extractor_hidden, &classifier_hidden, &critic_hidden})
    for (int w : *v)
      if (w < 1) throw std::invalid_argument("layer widths must be positive");
}

double lr_schedule(double progress, double base, double exponent) {
  if (!(progress >= 0.0 && progress <= 1.0)) throw std::invalid_argument("lr_schedule: progress must be in [0,1]");
  return base * std::pow(1.0 + 10.0 * progress, -exponent);
}

std::vector<std::size_t> BatchCursor::next(std::size_t count, std::mt19937_64& rng) {
  if (items_.empty()) throw std::invalid_argument("BatchCursor: empty group");
  std::vector<std::size_t> out;
  out.reserve(count);
  while (out.size() < count) {
    if (!shuffled_ || pos_ == items_.size()) {
      std::shuffle(items_.begin(), items_.end(), rng);
      pos_ = 0;
      shuffled_ = true;
    }
    out.push_back(items_[pos_++]);
  }
  return out;
}

void write_round_log(std::ostream& out, const std::vector<RoundLog>& rows) {
  out << "round,weighted_loss,critic_objective,w1_exact_subsample,w_min,w_max,w_entropy\n";
  out.precision(10);
  for (const auto& r : rows) {
    out << r.round << ',' << r.weighted_loss << ',' << r.critic_objective << ',';
    if (r.w1_exact_subsample) out << *r.w1_exact_subsample;
    out << ',' << r.w_min << ',' << r.w_max << ',' << r.w_entropy << '\n';
  }
}

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t which) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(which)};
  return std::mt19937_64(seq);
}

std::vector<int> widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

Matrix rows_of(const Matrix& x, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

std::vector<double> column(const Matrix& m) { return std::vector<double>(m.data(), m.data() + m.rows()); }

}  // namespace

TrainState init_state(const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  data.validate(false);
  TrainState s;
  const int d = static_cast<int>(data.dim());
  int latent = d;
  if (!cfg.extractor_hidden.empty()) {
    MlpSpec fs;
    fs.layer_widths = {d};
    fs.layer_widths.insert(fs.layer_widths.end(), cfg.extractor_hidden.begin(), cfg.extractor_hidden.end());
    fs.output_activation = Activation::Relu;
    fs.seed = cfg.seed * 4 + 1;
    s.extractor = MlpModel::init(fs);
    latent = cfg.extractor_hidden.back();
  }
  s.classifier = MlpModel::init({widths(latent, cfg.classifier_hidden, 1), Activation::Sigmoid, cfg.seed * 4 + 2});
  s.critic = MlpModel::init({widths(latent, cfg.critic_hidden, 1), Activation::Identity, cfg.seed * 4 + 3});

  s.majority_rows = data.majority_indices();
  s.minority_rows = data.minority_indices();
  const long n_p = static_cast<long>(s.majority_rows.size());
  const long n_u = static_cast<long>(s.minority_rows.size());
  if (cfg.weight_mode == WeightMode::Ones) {
    s.weights = uniform_weights(n_p, n_p, 0.0);
  } else {
    s.weights = uniform_weights(n_p, n_u, cfg.T);
  }
  s.minority_weights = uniform_weights(n_u, n_u, cfg.T);

  s.sgd = SgdMomentum(cfg.momentum);
  s.adam = Adam(cfg.lr_critic);
  s.batch_rng = stream(cfg.seed, 1);
  s.critic_rng = stream(cfg.seed, 2);
  s.majority_cursor = BatchCursor(s.majority_rows);
  s.minority_cursor = BatchCursor(s.minority_rows);
  s.classifier_steps = cfg.steps_classifier_per_round > 0
                           ? cfg.steps_classifier_per_round
                           : static_cast<int>((n_p + cfg.batch_majority - 1) / cfg.batch_majority);
  s.total_steps = std::max<long>(1, static_cast<long>(s.classifier_steps) * cfg.epochs);
  return s;
}

Matrix embed(const TrainState& s, const Matrix& x) { return extract_batch(s.extractor, x); }

std::vector<Prediction> predict(const TrainState& s, const Matrix& x) {
  return classify_batch(s.classifier, embed(s, x));
}

double classifier_step(Extractor& extractor, MlpModel& classifier, SgdMomentum& opt, const Matrix& x,
                       std::span<const int> y, std::span<const double> w, double lr) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (y.size() != n || w.size() != n) throw std::invalid_argument("classifier_step: length mismatch");
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("classifier_step: batch weights sum to zero");
  std::vector<double> coeff(n);
  for (std::size_t i = 0; i < n; ++i) coeff[i] = w[i] / total;

  diff::Tape tape;
  const auto in = tape.input({x.rows(), x.cols()}, "x");
  diff::Bindings b;
  b[in] = x;
  std::vector<diff::NodeId> params;
  std::vector<Matrix*> tensors;
  std::vector<double> rates;
  diff::NodeId z = in;
  const double head_rate = extractor ? 10.0 * lr : lr;
  if (extractor) {
    const auto g = extractor->build(tape, in, true);
    extractor->bind(g, b);
    z = g.output;
    params.insert(params.end(), g.params.begin(), g.params.end());
    for (Matrix* t : extractor->parameters()) {
      tensors.push_back(t);
      rates.push_back(lr);
    }
  }
  const auto g = classifier.build(tape, z, false);
  classifier.bind(g, b);
  params.insert(params.end(), g.params.begin(), g.params.end());
  for (Matrix* t : classifier.parameters()) {
    tensors.push_back(t);
    rates.push_back(head_rate);
  }
  const auto loss = cross_entropy_node(tape, g.output, y, coeff);
  tape.forward(std::move(b));
  const double value = tape.value(loss)(0, 0);
  opt.step(tensors, tape.backward(loss, params), rates);
  return value;
}

CriticStep critic_step(MlpModel& critic, Adam& opt, const Matrix& zp, const Matrix& zu, std::span<const double> eps,
                       double lambda, std::span<const double> coeff_p) {
  if (zp.rows() != zu.rows() || zp.cols() != zu.cols() || eps.size() != static_cast<std::size_t>(zp.rows()))
    throw std::invalid_argument("critic_step: batch shape mismatch");
  if (zp.rows() < 1) throw std::invalid_argument("critic_step: empty batch");
  const Eigen::Index B = zp.rows(), k = zp.cols();

  diff::Tape tape;
  diff::Bindings bind;
  const auto both = tape.input({2 * B, k}, "z");
  Matrix stacked(2 * B, k);
  stacked << zp, zu;
  bind[both] = std::move(stacked);
  const auto g1 = critic.build(tape, both, false);
  critic.bind(g1, bind);
  Matrix sign(2 * B, 1);
  if (coeff_p.empty()) {
    sign.topRows(B).setConstant(1.0 / static_cast<double>(B));
  } else {
    if (coeff_p.size() != static_cast<std::size_t>(B)) throw std::invalid_argument("critic_step: coefficient length");
    for (Eigen::Index i = 0; i < B; ++i) sign(i, 0) = coeff_p[static_cast<std::size_t>(i)];
  }
  sign.bottomRows(B).setConstant(-1.0 / static_cast<double>(B));
  const auto obj = tape.sum(tape.mul(g1.output, tape.constant(std::move(sign))));
  diff::NodeId loss = tape.scale(obj, -1.0);

  std::vector<diff::NodeId> params = g1.params;
  diff::NodeId pen = 0;
  const bool with_gp = lambda > 0.0;
  if (with_gp) {
    Matrix zh(B, k);
    for (Eigen::Index i = 0; i < B; ++i)
      zh.row(i) = eps[static_cast<std::size_t>(i)] * zu.row(i) + (1.0 - eps[static_cast<std::size_t>(i)]) * zp.row(i);
    const auto hat = tape.input({B, k}, "zhat");
    bind[hat] = std::move(zh);
    const auto g2 = critic.build(tape, hat, false);
    critic.bind(g2, bind);
    const auto grad = tape.gradient_as_node(tape.sum(g2.output), hat);
    const auto norm = tape.sqrt(tape.add_scalar(tape.sum(tape.square(grad), diff::Axis::Rows), 1e-12));
    pen = tape.mean(tape.square(tape.add_scalar(norm, -1.0)));
    loss = tape.add(loss, tape.scale(pen, lambda));
    params.insert(params.end(), g2.params.begin(), g2.params.end());
  }
  tape.forward(std::move(bind));
  CriticStep out;
  out.objective = tape.value(obj)(0, 0);
  if (with_gp) out.penalty = tape.value(pen)(0, 0);

  auto grads = tape.backward(loss, params);
  const std::size_t np = g1.params.size();
  if (with_gp)
    for (std::size_t i = 0; i < np; ++i) grads[i] += grads[np + i];
  grads.resize(np);
  opt.step(critic.parameters(), grads);
  return out;
}

double critic_objective(const MlpModel& critic, const Matrix& zp, std::span<const double> w, const Matrix& zu,
                        std::span<const double> v) {
  const Matrix dp = critic.forward(zp), du = critic.forward(zu);
  if (w.size() != static_cast<std::size_t>(zp.rows()) || v.size() != static_cast<std::size_t>(zu.rows()))
    throw std::invalid_argument("critic_objective: weight length mismatch");
  double a = 0.0, sa = 0.0, b = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    a += w[i] * dp(static_cast<Eigen::Index>(i), 0);
    sa += w[i];
  }
  for (std::size_t j = 0; j < v.size(); ++j) {
    b += v[j] * du(static_cast<Eigen::Index>(j), 0);
    sb += v[j];
  }
  if (!(sa > 0.0) || !(sb > 0.0)) throw std::invalid_argument("critic_objective: zero total weight");
  return a / sa - b / sb;
}

double gradient_penalty(const MlpModel& critic, const Matrix& z) {
  diff::Tape tape;
  diff::Bindings bind;
  const auto in = tape.input({z.rows(), z.cols()});
  bind[in] = z;
  const auto g = critic.build(tape, in, false);
  critic.bind(g, bind);
  const auto grad = tape.gradient_as_node(tape.sum(g.output), in);
  const auto norm = tape.sqrt(tape.add_scalar(tape.sum(tape.square(grad), diff::Axis::Rows), 1e-12));
  const auto pen = tape.mean(tape.square(tape.add_scalar(norm, -1.0)));
  tape.forward(std::move(bind));
  return tape.value(pen)(0, 0);
}

void classifier_round(TrainState& s, const Dataset& data, const TrainConfig& cfg) {
  const std::size_t bp = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_majority), s.majority_rows.size());
  const std::size_t bu = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_minority), s.minority_rows.size());
  // Position of each row inside its group, for weight lookup.
  std::vector<std::size_t> slot(data.n());
  for (std::size_t i = 0; i < s.majority_rows.size(); ++i) slot[s.majority_rows[i]] = i;
  for (std::size_t i = 0; i < s.minority_rows.size(); ++i) slot[s.minority_rows[i]] = i;

  double total = 0.0;
  for (int step = 0; step < s.classifier_steps; ++step) {
    auto rows = s.majority_cursor.next(bp, s.batch_rng);
    const auto minority = s.minority_cursor.next(bu, s.batch_rng);
    rows.insert(rows.end(), minority.begin(), minority.end());
    std::vector<int> y(rows.size());
    std::vector<double> w(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      y[i] = data.labels[rows[i]];
      w[i] = data.sensitive[rows[i]] ? s.weights.values[slot[rows[i]]] : s.minority_weights.values[slot[rows[i]]];
    }
    const double progress = std::min(1.0, static_cast<double>(s.steps_taken) / static_cast<double>(s.total_steps));
    const double lr = lr_schedule(progress, cfg.lr_classifier, cfg.lr_exponent);
    total += classifier_step(s.extractor, s.classifier, s.sgd, rows_of(data.features, rows), y, w, lr);
    ++s.steps_taken;
  }
  s.loss_history.push_back(s.classifier_steps > 0 ? total / s.classifier_steps : 0.0);
}

namespace {

bool all_equal(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

}  // namespace

CriticStep weighted_critic_step(MlpModel& critic, Adam& opt, std::mt19937_64& rng, const Matrix& z_majority,
                                const std::vector<double>& w, const Matrix& z_minority, const std::vector<double>& v,
                                const TrainConfig& cfg) {
  if (z_majority.rows() < 2 || z_minority.rows() < 2) throw std::invalid_argument("critic step: degenerate group");
  const auto n_u = static_cast<std::size_t>(z_minority.rows());
  const std::size_t B = cfg.critic_batch == 0 ? n_u : std::min<std::size_t>(static_cast<std::size_t>(cfg.critic_batch), n_u);

  std::vector<std::size_t> mi(B);
  if (all_equal(v)) {
    std::vector<std::size_t> all(n_u);
    std::iota(all.begin(), all.end(), 0);
    if (B < n_u) {
      for (std::size_t i = 0; i < B; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n_u - 1);
        std::swap(all[i], all[pick(rng)]);
      }
    }
    std::copy(all.begin(), all.begin() + static_cast<long>(B), mi.begin());
  } else {
    std::discrete_distribution<std::size_t> pick(v.begin(), v.end());
    for (auto& i : mi) i = pick(rng);
  }
  // Majority rows are drawn uniformly; their weights, rescaled to sum to one
  // over the batch, enter the objective.
  const auto n_p = static_cast<std::size_t>(z_majority.rows());
  const std::size_t Bp = std::min(B, n_p);
  std::vector<std::size_t> all(n_p);
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::size_t> pi(B);
  std::vector<double> coeff(B);
  double total = 0.0;
  while (!(total > 0.0)) {
    for (std::size_t i = 0; i < Bp; ++i) {
      std::uniform_int_distribution<std::size_t> pk(i, n_p - 1);
      std::swap(all[i], all[pk(rng)]);
    }
    total = 0.0;
    for (std::size_t i = 0; i < B; ++i) total += w[all[i % Bp]];
  }
  for (std::size_t i = 0; i < B; ++i) {
    pi[i] = all[i % Bp];
    coeff[i] = w[pi[i]] / total;
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> eps(B);
  for (auto& e : eps) e = unif(rng);
  return critic_step(critic, opt, rows_of(z_majority, pi), rows_of(z_minority, mi), eps, cfg.gp_coefficient, coeff);
}

CriticStep critic_round(TrainState& s, const Matrix& z_majority, const Matrix& z_minority, const TrainConfig& cfg) {
  const auto r = weighted_critic_step(s.critic, s.adam, s.critic_rng, z_majority, s.weights.values, z_minority,
                                      s.minority_weights.values, cfg);
  s.last_critic_objective = r.objective;
  s.last_penalty = r.penalty;
  return r;
}

void reweight_round(TrainState& s, const Matrix& z_majority, const Matrix& z_minority, const TrainConfig& cfg) {
  if (cfg.weight_mode != WeightMode::Adversarial) return;
  const long n_u = static_cast<long>(z_minority.rows());
  if (cfg.distance == DistanceKind::Mmd) {
    const double sigma = cfg.mmd_sigma > 0.0 ? cfg.mmd_sigma : median_heuristic_sigma(z_majority, z_minority, cfg.seed);
    s.weights = mmd_reweight(z_majority, z_minority, s.weights, sigma, cfg.mmd_iterations, cfg.mmd_exact_limit,
                             cfg.mmd_features, cfg.seed + static_cast<std::uint64_t>(s.round));
    s.last_critic_objective = mmd_distance(z_majority, s.weights.values, z_minority, sigma);
    return;
  }
  bool majority = cfg.reweight_target == ReweightTarget::Majority;
  if (cfg.reweight_target == ReweightTarget::Both) majority = s.round % 2 == 0;
  if (majority) {
    const auto d = column(s.critic.forward(z_majority));
    s.weights = solve_weights(d, n_u, cfg.T);
  } else {
    auto d = column(s.critic.forward(z_minority));
    for (double& v : d) v = -v;
    s.minority_weights = solve_weights(d, n_u, cfg.T);
  }
}

double mmd_distance(const Matrix& a, std::span<const double> weights_a, const Matrix& b, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("mmd_distance: sigma must be positive");
  if (a.cols() != b.cols()) throw std::invalid_argument("mmd_distance: dimension mismatch");
  if (weights_a.size() != static_cast<std::size_t>(a.rows()) || b.rows() < 1)
    throw std::invalid_argument("mmd_distance: bad sizes");
  const double total = std::accumulate(weights_a.begin(), weights_a.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("mmd_distance: weights sum to zero");
  const double g = 1.0 / (2.0 * sigma * sigma);
  auto k = [&](const auto& x, const auto& y) { return std::exp(-g * (x - y).squaredNorm()); };
  std::vector<Eigen::Index> nz;
  for (std::size_t i = 0; i < weights_a.size(); ++i)
    if (weights_a[i] != 0.0) nz.push_back(static_cast<Eigen::Index>(i));
  const double bm = 1.0 / static_cast<double>(b.rows());
  double aa = 0.0, bb = 0.0, ab = 0.0;
  for (auto i : nz)
    for (auto j : nz) aa += weights_a[static_cast<std::size_t>(i)] * weights_a[static_cast<std::size_t>(j)] * k(a.row(i), a.row(j));
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) bb += k(b.row(i), b.row(j));
  for (auto i : nz)
    for (Eigen::Index j = 0; j < b.rows(); ++j) ab += weights_a[static_cast<std::size_t>(i)] * k(a.row(i), b.row(j));
  return std::max(0.0, aa / (total * total) + bb * bm * bm - 2.0 * ab * bm / total);
}

double median_heuristic_sigma(const Matrix& a, const Matrix& b, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](const Matrix& m) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(m.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min<std::size_t>(idx.size(), 200));
    return idx;
  };
  const auto ia = pick(a), ib = pick(b);
  Matrix pooled(static_cast<Eigen::Index>(ia.size() + ib.size()), a.cols());
  Eigen::Index r = 0;
  for (auto i : ia) pooled.row(r++) = a.row(i);
  for (auto i : ib) pooled.row(r++) = b.row(i);
  std::vector<double> dist;
  for (Eigen::Index i = 0; i < pooled.rows(); ++i)
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) dist.push_back((pooled.row(i) - pooled.row(j)).norm());
  if (dist.empty()) return 1.0;
  std::nth_element(dist.begin(), dist.begin() + static_cast<long>(dist.size() / 2), dist.end());
  const double med = dist[dist.size() / 2];
  return med > 0.0 ? med : 1.0;
}

WeightVector mmd_reweight(const Matrix& z_majority, const Matrix& z_minority, const WeightVector& start, double sigma,
                          int iterations, long exact_limit, int features, std::uint64_t seed) {
  if (!(sigma > 0.0)) throw std::invalid_argument("mmd_reweight: sigma must be positive");
  const Eigen::Index n_p = z_majority.rows(), m = z_minority.rows();
  const double nu = static_cast<double>(start.n_u);
  Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(start.values.data(), n_p);

  // The objective is f(w) = w'Qw + c'w + const, with Q and c either from the
  // exact kernel or from a random-feature map.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> Q;
  Eigen::VectorXd c;
  Matrix K, phi;
  const double g = 1.0 / (2.0 * sigma * sigma);
  if (n_p <= exact_limit) {
    K.resize(n_p, n_p);
    for (Eigen::Index i = 0; i < n_p; ++i)
      for (Eigen::Index j = i; j < n_p; ++j)
        K(i, j) = K(j, i) = std::exp(-g * (z_majority.row(i) - z_majority.row(j)).squaredNorm());
    c.resize(n_p);
    for (Eigen::Index i = 0; i < n_p; ++i) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) s += std::exp(-g * (z_majority.row(i) - z_minority.row(j)).squaredNorm());
      c(i) = -2.0 * s / (nu * static_cast<double>(m));
    }
    Q = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return K * v / (nu * nu); };
  } else {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / sigma);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    Matrix omega(z_majority.cols(), features);
    for (Eigen::Index i = 0; i < omega.rows(); ++i)
      for (Eigen::Index j = 0; j < omega.cols(); ++j) omega(i, j) = normal(rng);
    Eigen::RowVectorXd b(features);
    for (int j = 0; j < features; ++j) b(j) = phase(rng);
    const double scale = std::sqrt(2.0 / features);
    auto feat = [&](const Matrix& z) {
      Matrix f = z * omega;
      f.rowwise() += b;
      return Matrix((f.array().cos() * scale).matrix());
    };
    phi = feat(z_majority);
    const Eigen::VectorXd mu = feat(z_minority).colwise().mean().transpose();
    c = -2.0 * phi * mu / nu;
    Q = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return phi * (phi.transpose() * v) / (nu * nu); };
  }

  WeightVector out = start;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd grad = 2.0 * Q(w) + c;
    const std::vector<double> gv(grad.data(), grad.data() + n_p);
    const WeightVector vertex = solve_weights(gv, start.n_u, start.T);
    const Eigen::VectorXd dir = Eigen::Map<const Eigen::VectorXd>(vertex.values.data(), n_p) - w;
    const double slope = grad.dot(dir);
    if (slope >= -1e-15) break;
    const double curv = dir.dot(Q(dir));
    const double gamma = curv > 0.0 ? std::clamp(-slope / (2.0 * curv), 0.0, 1.0) : 1.0;
    w += gamma * dir;
  }
  for (Eigen::Index i = 0; i < n_p; ++i) out.values[static_cast<std::size_t>(i)] = std::max(0.0, w(i));
  return out;
}

double audit_w1(const TrainState& s, const Dataset& data, std::size_t max_points, std::uint64_t seed) {
  WeightedPointCloud a{embed(s, rows_of(data.features, s.majority_rows)), s.weights.values};
  WeightedPointCloud b{embed(s, rows_of(data.features, s.minority_rows)), s.minority_weights.values};
  return subsampled_wasserstein(a, b, 1, max_points, 1, seed).mean;
}

namespace {

void weight_stats(const WeightVector& w, RoundLog& r) {
  r.w_min = *std::min_element(w.values.begin(), w.values.end());
  r.w_max = *std::max_element(w.values.begin(), w.values.end());
  const double total = w.sum();
  double h = 0.0;
  for (double x : w.values) {
    const double p = x / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  r.w_entropy = h;
}

}  // namespace

TrainState train(const Dataset& data, const TrainConfig& cfg, const RoundCallback& on_round) {
  TrainState s = init_state(data, cfg);
  const Matrix x_maj = rows_of(data.features, s.majority_rows);
  const Matrix x_min = rows_of(data.features, s.minority_rows);
  for (int e = 0; e < cfg.epochs; ++e) {
    classifier_round(s, data, cfg);
    if (cfg.weight_mode == WeightMode::Adversarial) {
      const Matrix zp = embed(s, x_maj);
      const Matrix zu = embed(s, x_min);
      if (cfg.distance == DistanceKind::Wasserstein)
        for (int c = 0; c < cfg.critic_steps_per_round; ++c) critic_round(s, zp, zu, cfg);
      reweight_round(s, zp, zu, cfg);
    }
    RoundLog row;
    row.round = s.round;
    row.weighted_loss = s.loss_history.back();
    row.critic_objective = s.last_critic_objective;
    weight_stats(s.weights, row);
    if (cfg.audit_every > 0 && ((e + 1) % cfg.audit_every == 0 || e + 1 == cfg.epochs))
      row.w1_exact_subsample = audit_w1(s, data, static_cast<std::size_t>(cfg.audit_points), cfg.seed + 1000003ULL * static_cast<std::uint64_t>(e));
    s.log.push_back(row);
    ++s.round;
    if (on_round) on_round(s);
  }
  return s;
}

}  // namespace arw
