#pragma once

// Alternating training: weighted classifier steps, critic ascent with a
// gradient penalty, then a weight solve against the critic scores.

#include "arw/data.hpp"
#include "arw/models.hpp"
#include "arw/optim.hpp"
#include "arw/reweight.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace arw {

enum class DistanceKind { Wasserstein, Mmd };
enum class ReweightTarget { Majority, Minority, Both };
/// How majority weights are produced: learned, frozen at n_u/n_p, or all 1.
enum class WeightMode { Adversarial, Uniform, Ones };

const char* distance_name(DistanceKind d);
DistanceKind parse_distance(const std::string& s);
const char* target_name(ReweightTarget t);
ReweightTarget parse_target(const std::string& s);

struct TrainConfig {
  int steps_classifier_per_round = 0;  // 0: one pass over the majority group
  int critic_steps_per_round = 5;
  int batch_majority = 1000;
  int batch_minority = 500;
  int critic_batch = 500;  // minority points per critic step; 0 uses all
  int epochs = 50;
  double lr_classifier = 0.01;
  double lr_exponent = 0.75;
  double lr_critic = 1e-4;
  double momentum = 0.9;
  double gp_coefficient = 10.0;
  double T = 5.0;
  std::uint64_t seed = 0;
  DistanceKind distance = DistanceKind::Wasserstein;
  ReweightTarget reweight_target = ReweightTarget::Majority;
  WeightMode weight_mode = WeightMode::Adversarial;

  std::vector<int> extractor_hidden;  // empty: identity extractor
  std::vector<int> classifier_hidden{64, 32};
  std::vector<int> critic_hidden{512, 256, 128, 64};

  int audit_every = 0;  // rounds between exact W1 audits; 0 disables
  int audit_points = 512;

  double mmd_sigma = 0.0;  // 0: median heuristic
  int mmd_iterations = 10;
  int mmd_features = 1024;  // random features when the exact kernel is too large
  long mmd_exact_limit = 3000;

  void validate() const;
};

double lr_schedule(double progress, double base, double exponent = 0.75);

/// Cycles through a shuffled index list, reshuffling after each pass.
class BatchCursor {
 public:
  BatchCursor() = default;
  explicit BatchCursor(std::vector<std::size_t> items) : items_(std::move(items)) {}
  std::vector<std::size_t> next(std::size_t count, std::mt19937_64& rng);

 private:
  std::vector<std::size_t> items_;
  std::size_t pos_ = 0;
  bool shuffled_ = false;
};

struct RoundLog {
  int round = 0;
  double weighted_loss = 0.0;
  double critic_objective = 0.0;
  std::optional<double> w1_exact_subsample;
  double w_min = 0.0;
  double w_max = 0.0;
  double w_entropy = 0.0;
};

void write_round_log(std::ostream& out, const std::vector<RoundLog>& rows);

struct TrainState {
  Extractor extractor;
  MlpModel classifier;
  MlpModel critic;
  WeightVector weights;           // majority rows, in majority_rows order
  WeightVector minority_weights;  // minority rows; all 1 unless reweighted
  int round = 0;
  std::vector<double> loss_history;  // mean weighted loss per round
  std::vector<RoundLog> log;

  std::vector<std::size_t> majority_rows;
  std::vector<std::size_t> minority_rows;
  SgdMomentum sgd;
  Adam adam;
  std::mt19937_64 batch_rng;
  std::mt19937_64 critic_rng;
  BatchCursor majority_cursor, minority_cursor;
  long steps_taken = 0;
  long total_steps = 1;
  int classifier_steps = 1;
  double last_critic_objective = 0.0;
  double last_penalty = 0.0;
};

TrainState init_state(const Dataset& data, const TrainConfig& cfg);

/// Latent codes for the rows of x.
Matrix embed(const TrainState& s, const Matrix& x);
std::vector<Prediction> predict(const TrainState& s, const Matrix& x);

/// One SGD step on sum(w * loss) / sum(w) over the batch; returns the loss
/// before the step. Classifier tensors get 10x the rate when an extractor
/// is present.
double classifier_step(Extractor& extractor, MlpModel& classifier, SgdMomentum& opt, const Matrix& x,
                       std::span<const int> y, std::span<const double> w, double lr);

struct CriticStep {
  double objective = 0.0;  // mean D(majority) - mean D(minority), before the step
  double penalty = 0.0;
};

/// Adam step on -(sum_i c_i D(zp_i) - mean D(zu)) + lambda * GP, with
/// interpolates eps_i * zu_i + (1 - eps_i) * zp_i. c defaults to 1/B.
CriticStep critic_step(MlpModel& critic, Adam& opt, const Matrix& zp, const Matrix& zu, std::span<const double> eps,
                       double lambda, std::span<const double> coeff_p = {});

/// sum_i w_i D(zp_i) / sum w - sum_j v_j D(zu_j) / sum v.
double critic_objective(const MlpModel& critic, const Matrix& zp, std::span<const double> w, const Matrix& zu,
                        std::span<const double> v);
/// mean over rows of (||grad_z D(z)|| - 1)^2.
double gradient_penalty(const MlpModel& critic, const Matrix& z);

/// Draws a critic batch (minority rows in proportion to v, majority rows
/// uniformly with their weights in the objective, one interpolation weight
/// per pair) and takes one step.
CriticStep weighted_critic_step(MlpModel& critic, Adam& opt, std::mt19937_64& rng, const Matrix& z_majority,
                                const std::vector<double>& w, const Matrix& z_minority, const std::vector<double>& v,
                                const TrainConfig& cfg);

/// S classifier steps with fixed group counts per batch.
void classifier_round(TrainState& s, const Dataset& data, const TrainConfig& cfg);
/// One critic step on a weighted resample of the given embeddings.
CriticStep critic_round(TrainState& s, const Matrix& z_majority, const Matrix& z_minority, const TrainConfig& cfg);
/// Re-solves the designated weights from the current critic (or MMD).
void reweight_round(TrainState& s, const Matrix& z_majority, const Matrix& z_minority, const TrainConfig& cfg);

/// Biased squared MMD with an RBF kernel; weights_a are normalized inside,
/// b carries uniform masses.
double mmd_distance(const Matrix& a, std::span<const double> weights_a, const Matrix& b, double sigma);
double median_heuristic_sigma(const Matrix& a, const Matrix& b, std::uint64_t seed);
/// Conditional-gradient minimisation of the MMD over the feasible weight set,
/// starting from `start`.
WeightVector mmd_reweight(const Matrix& z_majority, const Matrix& z_minority, const WeightVector& start,
                          double sigma, int iterations, long exact_limit, int features, std::uint64_t seed);

using RoundCallback = std::function<void(const TrainState&)>;
TrainState train(const Dataset& data, const TrainConfig& cfg, const RoundCallback& on_round = {});

/// Exact W1 between the weighted majority and minority latent clouds on
/// subsamples of at most max_points each.
double audit_w1(const TrainState& s, const Dataset& data, std::size_t max_points, std::uint64_t seed);

}  // namespace arw
