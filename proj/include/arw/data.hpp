#pragma once

// Tabular ingestion, preprocessing and the data-level baselines.
//
// Majority rows carry s = 1, minority rows s = 0.

#include "arw/models.hpp"
#include "arw/reweight.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace arw {

enum class ColumnKind { Continuous, Categorical, Label, Sensitive, Ignore };

const char* column_kind_name(ColumnKind k);
ColumnKind parse_column_kind(const std::string& s);

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
  std::vector<std::string> positive_label_values;     // label column only
  std::vector<std::string> majority_sensitive_values;  // sensitive column only
};

struct DatasetSchema {
  std::vector<ColumnSchema> columns;
  /// One-hot encode the sensitive column as an ordinary feature too.
  bool sensitive_as_feature = true;
  std::string missing_marker = "?";

  const ColumnSchema& label() const;
  const ColumnSchema& sensitive() const;
  /// Exactly one label and one sensitive column, names unique.
  void validate() const;
};

/// Parsed CSV cells for the schema's columns; rows with missing values or
/// the wrong field count are already dropped.
struct RawTable {
  DatasetSchema schema;
  std::vector<std::string> column_names;          // schema columns in file order
  std::vector<std::vector<std::string>> cells;    // row-major, schema columns only
  long dropped_missing = 0;
  long dropped_malformed = 0;

  std::size_t column_index(const std::string& name) const;
};

struct ContinuousStats {
  std::string column;
  double mean = 0.0;
  double sd = 1.0;
};

struct CategoryMap {
  std::string column;
  std::vector<std::string> levels;  // sorted; one output column each
};

/// Fitted encoding: z-scores for continuous columns, one-hot blocks for
/// categorical ones.
struct Preprocessing {
  std::vector<ContinuousStats> continuous;
  std::vector<CategoryMap> categorical;
  std::vector<std::string> feature_names;

  static Preprocessing fit(const RawTable& raw, const std::vector<std::size_t>& rows);
  /// Unknown categories encode as an all-zeros block; the count is returned
  /// through unknown_count when given.
  Matrix apply(const RawTable& raw, const std::vector<std::size_t>& rows, long* unknown_count = nullptr) const;
};

class Dataset {
 public:
  Matrix features;
  std::vector<int> labels;
  std::vector<int> sensitive;
  /// Level index of the raw sensitive value (0/1 for binary data).
  std::vector<int> group;
  std::vector<std::string> group_levels;
  std::vector<std::string> feature_names;
  Preprocessing preprocessing;

  /// Raw table and row numbers this dataset was encoded from (null for
  /// synthetic and cached data); used to refit on a training split.
  std::shared_ptr<const RawTable> raw;
  std::vector<std::size_t> raw_rows;

  std::size_t n() const { return labels.size(); }
  Eigen::Index dim() const { return features.cols(); }
  long n_p() const;
  long n_u() const;
  std::vector<std::size_t> majority_indices() const;
  std::vector<std::size_t> minority_indices() const;

  /// Rows by index (duplicates allowed), encoding unchanged.
  Dataset subset(const std::vector<std::size_t>& rows) const;
  /// Throws unless n_p >= n_u >= 1, sizes agree and values are in range.
  void validate(bool require_majority = true) const;
};

struct LoadReport {
  long rows_read = 0;
  long dropped_missing = 0;
  long dropped_malformed = 0;
  long unknown_categories = 0;
};

RawTable read_csv(const std::string& path, const DatasetSchema& schema);
/// Encodes every row with preprocessing fitted on the whole table.
Dataset encode(std::shared_ptr<const RawTable> raw, LoadReport* report = nullptr);
Dataset load_csv(const std::string& path, const DatasetSchema& schema, LoadReport* report = nullptr);

struct Split {
  Dataset train;
  Dataset test;
};

/// Stratified on (label, sensitive). When the dataset came from a raw table
/// the encoding is refitted on the training rows and applied to both parts.
Split split(const Dataset& data, double test_fraction, std::uint64_t seed);

struct SyntheticParams {
  long n_p = 900;
  long n_u = 100;
  int dim = 2;
  double group_shift = 4.0;
  /// Threshold on the class axis for minority-like points, in units of sd.
  double class_sep = 0.8416;
  /// Class-axis threshold for the shifted majority component (units of sd).
  double shifted_class_sep = 0.2533;
  double sd = 0.25;
  /// Standard deviation along the group axis 0.
  double spread = 1.0;
  /// Share of the majority drawn from the minority generator.
  double overlap = 0.2;
  std::uint64_t seed = 0;
};

/// Minority ~ N(0, diag(spread^2, sd^2, ..., sd^2)). Majority: an `overlap`
/// share from the same generator, the rest from a majority-only copy moved
/// by group_shift along axis 0. y = 1 when x_1 exceeds class_sep * sd, or
/// shifted_class_sep * sd for the majority-only component.
Dataset make_synthetic(const SyntheticParams& p);

/// Flips round(ratio * n) labels, half in each group (odd flip goes to the
/// majority). Same seed gives the same flips, so applying twice restores.
Dataset inject_label_noise(const Dataset& data, double ratio, std::uint64_t seed);

Dataset undersample(const Dataset& data, std::uint64_t seed);
Dataset oversample(const Dataset& data, std::uint64_t seed);
/// All majority weights n_u / n_p.
WeightVector reweighing_weights(const Dataset& data);

struct SubgroupView {
  std::string level;
  int level_index = 0;
  /// Rows of this subgroup (s = 1) and of the reference subgroup (s = 0).
  Dataset data;
  std::vector<std::size_t> rows;  // indices into the source dataset
};

/// One binary view per non-reference level of the sensitive column.
std::vector<SubgroupView> multi_group_prepare(const Dataset& data, const std::string& reference_level);

void save_dataset_cache(const Dataset& data, const std::string& path);
Dataset load_dataset_cache(const std::string& path);

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 1469598103934665603ULL);

}  // namespace arw
