#pragma once

// Several sensitive subgroups: one reference level keeps weight 1 and every
// other level gets its own critic and weight vector, refreshed in turn.

#include "arw/adversarial.hpp"

#include <string>
#include <vector>

namespace arw {

struct MultiGroupState {
  Extractor extractor;
  MlpModel classifier;
  int reference = 0;                       // level index
  std::vector<int> levels;                 // reweighted level indices
  std::vector<std::vector<std::size_t>> rows;  // rows per reweighted level
  std::vector<std::size_t> reference_rows;
  std::vector<MlpModel> critics;
  std::vector<Adam> adams;
  std::vector<WeightVector> weights;  // sum to the reference size each
  std::vector<double> loss_history;
  int round = 0;
};

/// cfg.weight_mode = Ones gives the unweighted baseline on the same batches.
MultiGroupState train_multigroup(const Dataset& data, const std::string& reference_level, const TrainConfig& cfg);

std::vector<Prediction> predict(const MultiGroupState& s, const Matrix& x);

}  // namespace arw
