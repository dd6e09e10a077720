#pragma once

#include "arw/diffcore.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace arw {

using Matrix = diff::Matrix;
using Vector = Eigen::VectorXd;

enum class Activation { Identity, Sigmoid, Relu };

const char* activation_name(Activation a);
Activation parse_activation(const std::string& s);

/// Fully connected network layout. layer_widths holds the input width
/// followed by every layer's output width, so [4, 8, 1] has two layers.
struct MlpSpec {
  std::vector<int> layer_widths;
  Activation output_activation = Activation::Identity;
  std::uint64_t seed = 0;

  int input_dim() const { return layer_widths.front(); }
  int output_dim() const { return layer_widths.back(); }
  std::size_t layer_count() const { return layer_widths.size() - 1; }
  void validate() const;
};

/// Graph handles produced by MlpModel::build.
struct MlpGraph {
  diff::NodeId output = 0;
  std::vector<diff::NodeId> params;  // W0, b0, W1, b1, ...
};

class MlpModel {
 public:
  MlpModel() = default;

  /// Hidden layers use relu. Weights are U(-a, a) with a = sqrt(6 / fan_in),
  /// biases start at zero. Identical specs give bitwise-identical models.
  static MlpModel init(const MlpSpec& spec);

  const MlpSpec& spec() const { return spec_; }

  // Layer l maps width[l] -> width[l+1]; weight is (out x in), bias is (1 x out).
  std::vector<Matrix>& weights() { return weights_; }
  const std::vector<Matrix>& weights() const { return weights_; }
  std::vector<Matrix>& biases() { return biases_; }
  const std::vector<Matrix>& biases() const { return biases_; }

  /// Rows of x are samples. Returns one row of outputs per sample.
  Matrix forward(const Matrix& x) const;
  /// Pre-activation of the last layer.
  Matrix logits(const Matrix& x) const;

  /// Appends the network applied to node x (n x input_dim) to the tape.
  MlpGraph build(diff::Tape& tape, diff::NodeId x, bool apply_output_activation) const;
  /// Parameter values in the same order as MlpGraph::params.
  void bind(const MlpGraph& g, diff::Bindings& bindings) const;
  /// Parameter tensors in MlpGraph::params order, for optimizers.
  std::vector<Matrix*> parameters();

  std::size_t parameter_count() const;

  bool operator==(const MlpModel& other) const;

 private:
  Matrix run(const Matrix& x, bool apply_output_activation) const;

  MlpSpec spec_;
  std::vector<Matrix> weights_;
  std::vector<Matrix> biases_;
};

struct Prediction {
  double probability = 0.0;
  int label = 0;
};

Prediction make_prediction(double probability);

/// Feature extractor. An empty optional is the identity map.
using Extractor = std::optional<MlpModel>;

Vector extract(const Extractor& f, const Vector& x);
Matrix extract_batch(const Extractor& f, const Matrix& x);

Prediction classify(const MlpModel& c, const Vector& z);
std::vector<Prediction> classify_batch(const MlpModel& c, const Matrix& z);

double critic_score(const MlpModel& d, const Vector& z);

/// sum_i w_i * CE(p_i, y_i) with p clamped to [1e-12, 1 - 1e-12].
double weighted_cross_entropy(std::span<const double> probabilities, std::span<const int> labels,
                              std::span<const double> weights);

inline constexpr double kProbabilityClamp = 1e-12;

/// Builds sum_i c_i * CE(sigmoid(logit_i), y_i) on the tape; logits is n x 1.
/// coeff holds the c_i (already normalized if a mean is wanted).
diff::NodeId cross_entropy_node(diff::Tape& tape, diff::NodeId logits, std::span<const int> labels,
                                std::span<const double> coeff);

// Checkpoint format (JSON):
//   {"format": "arw-mlp", "version": 1,
//    "spec": {"layer_widths": [...], "output_activation": "...", "seed": n},
//    "layers": [{"weight": {"rows": r, "cols": c, "data": [row-major]},
//                "bias": [..]}, ...]}
std::string to_json(const MlpModel& m);
MlpModel mlp_from_json(const std::string& text);
void save_model(const MlpModel& m, const std::string& path);
MlpModel load_model(const std::string& path);

}  // namespace arw
