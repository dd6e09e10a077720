#include "arw/multigroup.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace arw {

namespace {

Matrix rows_of(const Matrix& x, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

}  // namespace

MultiGroupState train_multigroup(const Dataset& data, const std::string& reference_level, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.reweight_target != ReweightTarget::Majority || cfg.distance != DistanceKind::Wasserstein)
    throw std::invalid_argument("multi-group training supports the wasserstein/majority arm only");
  const auto views = multi_group_prepare(data, reference_level);

  // Reuse the binary initialisation for the networks and RNG streams.
  TrainState base = init_state(data, cfg);
  MultiGroupState s;
  s.extractor = base.extractor;
  s.classifier = base.classifier;
  s.reference = static_cast<int>(std::find(data.group_levels.begin(), data.group_levels.end(), reference_level) -
                                 data.group_levels.begin());
  for (std::size_t i = 0; i < data.n(); ++i)
    if (data.group[i] == s.reference) s.reference_rows.push_back(i);
  const long n_ref = static_cast<long>(s.reference_rows.size());
  std::vector<std::size_t> pool;
  for (std::size_t g = 0; g < views.size(); ++g) {
    s.levels.push_back(views[g].level_index);
    std::vector<std::size_t> r;
    for (std::size_t i = 0; i < data.n(); ++i)
      if (data.group[i] == views[g].level_index) r.push_back(i);
    pool.insert(pool.end(), r.begin(), r.end());
    const long n_g = static_cast<long>(r.size());
    s.weights.push_back(cfg.weight_mode == WeightMode::Ones ? uniform_weights(n_g, n_g, 0.0)
                                                             : uniform_weights(n_g, n_ref, cfg.T));
    s.rows.push_back(std::move(r));
    MlpSpec cs = base.critic.spec();
    cs.seed += 7919ULL * (g + 1);
    s.critics.push_back(MlpModel::init(cs));
    s.adams.emplace_back(cfg.lr_critic);
  }

  // Batches keep the data's own reference share so the unweighted run is
  // plain uniform SGD.
  const int B = cfg.batch_majority + cfg.batch_minority;
  const auto bu = static_cast<std::size_t>(
      std::max(1L, std::lround(static_cast<double>(B) * static_cast<double>(n_ref) / static_cast<double>(data.n()))));
  const std::size_t bp = std::min<std::size_t>(static_cast<std::size_t>(B) - std::min<std::size_t>(bu, B - 1), pool.size());
  const int steps = cfg.steps_classifier_per_round > 0
                        ? cfg.steps_classifier_per_round
                        : static_cast<int>((pool.size() + bp - 1) / bp);
  const long total_steps = std::max<long>(1, static_cast<long>(steps) * cfg.epochs);

  std::vector<int> level_slot(data.group_levels.size(), -1);
  for (std::size_t g = 0; g < s.levels.size(); ++g) level_slot[static_cast<std::size_t>(s.levels[g])] = static_cast<int>(g);
  std::vector<std::size_t> pos(data.n());
  for (const auto& r : s.rows)
    for (std::size_t i = 0; i < r.size(); ++i) pos[r[i]] = i;

  BatchCursor pool_cursor(pool), ref_cursor(s.reference_rows);
  SgdMomentum sgd(cfg.momentum);
  std::mt19937_64& batch_rng = base.batch_rng;
  std::mt19937_64& critic_rng = base.critic_rng;
  const Matrix z_ref_x = rows_of(data.features, s.reference_rows);
  const std::vector<double> ones(s.reference_rows.size(), 1.0);
  long taken = 0;

  for (int e = 0; e < cfg.epochs; ++e) {
    double total = 0.0;
    for (int k = 0; k < steps; ++k) {
      auto rows = pool_cursor.next(bp, batch_rng);
      const auto ref = ref_cursor.next(std::min<std::size_t>(bu, s.reference_rows.size()), batch_rng);
      rows.insert(rows.end(), ref.begin(), ref.end());
      std::vector<int> y(rows.size());
      std::vector<double> w(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        y[i] = data.labels[rows[i]];
        const int slot = level_slot[static_cast<std::size_t>(data.group[rows[i]])];
        w[i] = slot < 0 ? 1.0 : s.weights[static_cast<std::size_t>(slot)].values[pos[rows[i]]];
      }
      const double progress = std::min(1.0, static_cast<double>(taken) / static_cast<double>(total_steps));
      total += classifier_step(s.extractor, s.classifier, sgd, rows_of(data.features, rows), y, w,
                               lr_schedule(progress, cfg.lr_classifier, cfg.lr_exponent));
      ++taken;
    }
    s.loss_history.push_back(total / steps);

    if (cfg.weight_mode == WeightMode::Adversarial) {
      const std::size_t g = static_cast<std::size_t>(e) % s.levels.size();
      const Matrix zg = extract_batch(s.extractor, rows_of(data.features, s.rows[g]));
      const Matrix zr = extract_batch(s.extractor, z_ref_x);
      for (int c = 0; c < cfg.critic_steps_per_round; ++c)
        weighted_critic_step(s.critics[g], s.adams[g], critic_rng, zg, s.weights[g].values, zr, ones, cfg);
      const Matrix d = s.critics[g].forward(zg);
      s.weights[g] = solve_weights(std::vector<double>(d.data(), d.data() + d.rows()), n_ref, cfg.T);
    }
    ++s.round;
  }
  return s;
}

std::vector<Prediction> predict(const MultiGroupState& s, const Matrix& x) {
  return classify_batch(s.classifier, extract_batch(s.extractor, x));
}

}  // namespace arw
