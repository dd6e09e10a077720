#include "arw/data.hpp"

#include <boost/algorithm/string/trim.hpp>
#include <boost/tokenizer.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

namespace arw {

const char* column_kind_name(ColumnKind k) {
  switch (k) {
    case ColumnKind::Continuous: return "continuous";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::Label: return "label";
    case ColumnKind::Sensitive: return "sensitive";
    case ColumnKind::Ignore: return "ignore";
  }
  return "?";
}

ColumnKind parse_column_kind(const std::string& s) {
  for (auto k : {ColumnKind::Continuous, ColumnKind::Categorical, ColumnKind::Label, ColumnKind::Sensitive,
                 ColumnKind::Ignore})
    if (s == column_kind_name(k)) return k;
  throw std::invalid_argument("unknown column kind '" + s + "'");
}

namespace {

const ColumnSchema& only_of_kind(const DatasetSchema& s, ColumnKind k) {
  const ColumnSchema* found = nullptr;
  for (const auto& c : s.columns) {
    if (c.kind != k) continue;
    if (found) throw std::invalid_argument(std::string("schema has more than one ") + column_kind_name(k) + " column");
    found = &c;
  }
  if (!found) throw std::invalid_argument(std::string("schema has no ") + column_kind_name(k) + " column");
  return *found;
}

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace

const ColumnSchema& DatasetSchema::label() const { return only_of_kind(*this, ColumnKind::Label); }
const ColumnSchema& DatasetSchema::sensitive() const { return only_of_kind(*this, ColumnKind::Sensitive); }

void DatasetSchema::validate() const {
  const auto& l = label();
  const auto& s = sensitive();
  if (l.positive_label_values.empty()) throw std::invalid_argument("label column needs a positive value");
  if (s.majority_sensitive_values.empty()) throw std::invalid_argument("sensitive column needs a majority value");
  std::set<std::string> names;
  for (const auto& c : columns)
    if (!names.insert(c.name).second) throw std::invalid_argument("duplicate schema column '" + c.name + "'");
}

std::size_t RawTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < column_names.size(); ++i)
    if (column_names[i] == name) return i;
  throw std::invalid_argument("no column '" + name + "'");
}

RawTable read_csv(const std::string& path, const DatasetSchema& schema) {
  schema.validate();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
  auto fields = [](const std::string& line) {
    std::vector<std::string> out;
    Tokenizer tok(line);
    for (auto f : tok) {
      boost::algorithm::trim(f);
      out.push_back(f);
    }
    return out;
  };

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = fields(line);

  RawTable t;
  t.schema = schema;
  std::vector<std::size_t> source;  // file column for each kept column
  for (std::size_t i = 0; i < header.size(); ++i) {
    for (const auto& c : schema.columns)
      if (c.name == header[i] && c.kind != ColumnKind::Ignore) {
        t.column_names.push_back(c.name);
        source.push_back(i);
      }
  }
  for (const auto& c : schema.columns)
    if (c.kind != ColumnKind::Ignore && !contains(t.column_names, c.name))
      throw std::invalid_argument(path + ": schema column '" + c.name + "' not in header");

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    try {
      f = fields(line);
    } catch (const boost::escaped_list_error&) {
      ++t.dropped_malformed;
      continue;
    }
    if (f.size() != header.size()) {
      ++t.dropped_malformed;
      continue;
    }
    std::vector<std::string> row;
    bool missing = false;
    for (std::size_t k : source) {
      if (f[k].empty() || f[k] == schema.missing_marker) missing = true;
      row.push_back(f[k]);
    }
    if (missing) {
      ++t.dropped_missing;
      continue;
    }
    t.cells.push_back(std::move(row));
  }
  // Continuous cells must parse; anything else counts as malformed.
  std::vector<std::size_t> numeric;
  for (const auto& c : schema.columns)
    if (c.kind == ColumnKind::Continuous) numeric.push_back(t.column_index(c.name));
  auto bad = [&](const std::vector<std::string>& row) {
    for (std::size_t k : numeric) {
      char* end = nullptr;
      const double v = std::strtod(row[k].c_str(), &end);
      if (end == row[k].c_str() || *end != '\0' || !std::isfinite(v)) return true;
    }
    return false;
  };
  const auto before = t.cells.size();
  t.cells.erase(std::remove_if(t.cells.begin(), t.cells.end(), bad), t.cells.end());
  t.dropped_malformed += static_cast<long>(before - t.cells.size());
  return t;
}

Preprocessing Preprocessing::fit(const RawTable& raw, const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw std::invalid_argument("cannot fit preprocessing on zero rows");
  Preprocessing p;
  for (const auto& c : raw.schema.columns) {
    const bool as_categorical =
        c.kind == ColumnKind::Categorical || (c.kind == ColumnKind::Sensitive && raw.schema.sensitive_as_feature);
    if (c.kind == ColumnKind::Continuous) {
      const std::size_t k = raw.column_index(c.name);
      double s = 0.0, ss = 0.0;
      for (std::size_t r : rows) s += std::stod(raw.cells[r][k]);
      const double mean = s / static_cast<double>(rows.size());
      for (std::size_t r : rows) {
        const double d = std::stod(raw.cells[r][k]) - mean;
        ss += d * d;
      }
      double sd = std::sqrt(ss / static_cast<double>(rows.size()));
      if (sd == 0.0) sd = 1.0;
      p.continuous.push_back({c.name, mean, sd});
      p.feature_names.push_back(c.name);
    } else if (as_categorical) {
      const std::size_t k = raw.column_index(c.name);
      std::set<std::string> levels;
      for (std::size_t r : rows) levels.insert(raw.cells[r][k]);
      p.categorical.push_back({c.name, {levels.begin(), levels.end()}});
      for (const auto& l : levels) p.feature_names.push_back(c.name + "=" + l);
    }
  }
  return p;
}

Matrix Preprocessing::apply(const RawTable& raw, const std::vector<std::size_t>& rows, long* unknown_count) const {
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(feature_names.size()));
  long unknown = 0;
  std::size_t ci = 0, ki = 0;
  Eigen::Index col = 0;
  for (const auto& c : raw.schema.columns) {
    if (ci < continuous.size() && continuous[ci].column == c.name) {
      const std::size_t k = raw.column_index(c.name);
      for (std::size_t i = 0; i < rows.size(); ++i)
        x(static_cast<Eigen::Index>(i), col) = (std::stod(raw.cells[rows[i]][k]) - continuous[ci].mean) / continuous[ci].sd;
      ++col;
      ++ci;
    } else if (ki < categorical.size() && categorical[ki].column == c.name) {
      const std::size_t k = raw.column_index(c.name);
      const auto& levels = categorical[ki].levels;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto it = std::lower_bound(levels.begin(), levels.end(), raw.cells[rows[i]][k]);
        if (it == levels.end() || *it != raw.cells[rows[i]][k]) {
          ++unknown;
          continue;
        }
        x(static_cast<Eigen::Index>(i), col + (it - levels.begin())) = 1.0;
      }
      col += static_cast<Eigen::Index>(levels.size());
      ++ki;
    }
  }
  if (unknown > 0) std::cerr << "warning: " << unknown << " unknown categorical values encoded as zeros\n";
  if (unknown_count) *unknown_count = unknown;
  return x;
}

long Dataset::n_p() const { return std::count(sensitive.begin(), sensitive.end(), 1); }
long Dataset::n_u() const { return std::count(sensitive.begin(), sensitive.end(), 0); }

std::vector<std::size_t> Dataset::majority_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sensitive.size(); ++i)
    if (sensitive[i] == 1) out.push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::minority_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sensitive.size(); ++i)
    if (sensitive[i] == 0) out.push_back(i);
  return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset d;
  d.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n()) throw std::out_of_range("Dataset::subset: row out of range");
    d.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
    d.labels.push_back(labels[rows[i]]);
    d.sensitive.push_back(sensitive[rows[i]]);
    d.group.push_back(group[rows[i]]);
    if (raw) d.raw_rows.push_back(raw_rows[rows[i]]);
  }
  d.group_levels = group_levels;
  d.feature_names = feature_names;
  d.preprocessing = preprocessing;
  d.raw = raw;
  return d;
}

void Dataset::validate(bool require_majority) const {
  if (static_cast<std::size_t>(features.rows()) != n() || sensitive.size() != n() || group.size() != n())
    throw std::invalid_argument("dataset: inconsistent row counts");
  if (static_cast<std::size_t>(features.cols()) != feature_names.size())
    throw std::invalid_argument("dataset: feature name count does not match columns");
  for (std::size_t i = 0; i < n(); ++i) {
    if ((labels[i] != 0 && labels[i] != 1) || (sensitive[i] != 0 && sensitive[i] != 1))
      throw std::invalid_argument("dataset: labels and sensitive values must be 0 or 1");
  }
  if (!features.allFinite()) throw std::invalid_argument("dataset: non-finite feature value");
  if (n_u() < 1 || n_p() < 1) throw std::invalid_argument("dataset: both sensitive groups must be nonempty");
  if (require_majority && n_p() < n_u()) throw std::invalid_argument("dataset: group s=1 must be the majority");
}

namespace {

Dataset build(std::shared_ptr<const RawTable> raw, const std::vector<std::size_t>& rows, Preprocessing prep,
              const std::vector<std::string>& group_levels, long* unknown) {
  const auto& sch = raw->schema;
  const std::size_t lk = raw->column_index(sch.label().name);
  const std::size_t sk = raw->column_index(sch.sensitive().name);
  Dataset d;
  d.features = prep.apply(*raw, rows, unknown);
  d.feature_names = prep.feature_names;
  d.preprocessing = std::move(prep);
  d.group_levels = group_levels;
  for (std::size_t r : rows) {
    const auto& row = raw->cells[r];
    d.labels.push_back(contains(sch.label().positive_label_values, row[lk]) ? 1 : 0);
    d.sensitive.push_back(contains(sch.sensitive().majority_sensitive_values, row[sk]) ? 1 : 0);
    d.group.push_back(static_cast<int>(std::lower_bound(group_levels.begin(), group_levels.end(), row[sk]) -
                                       group_levels.begin()));
  }
  d.raw = std::move(raw);
  d.raw_rows = rows;
  return d;
}

}  // namespace

Dataset encode(std::shared_ptr<const RawTable> raw, LoadReport* report) {
  std::vector<std::size_t> rows(raw->cells.size());
  std::iota(rows.begin(), rows.end(), 0);
  if (rows.empty()) throw std::runtime_error("no usable rows");
  const std::size_t sk = raw->column_index(raw->schema.sensitive().name);
  std::set<std::string> levels;
  for (const auto& row : raw->cells) levels.insert(row[sk]);
  long unknown = 0;
  Dataset d = build(raw, rows, Preprocessing::fit(*raw, rows), {levels.begin(), levels.end()}, &unknown);
  if (report) {
    report->rows_read = static_cast<long>(rows.size());
    report->dropped_missing = raw->dropped_missing;
    report->dropped_malformed = raw->dropped_malformed;
    report->unknown_categories = unknown;
  }
  d.validate();
  return d;
}

Dataset load_csv(const std::string& path, const DatasetSchema& schema, LoadReport* report) {
  return encode(std::make_shared<const RawTable>(read_csv(path, schema)), report);
}

Split split(const Dataset& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw std::invalid_argument("split: fraction must be in (0,1)");
  std::vector<std::size_t> strata[4];
  for (std::size_t i = 0; i < data.n(); ++i)
    strata[2 * data.labels[i] + data.sensitive[i]].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train, test;
  for (auto& s : strata) {
    if (s.empty()) continue;
    if (s.size() < 2) throw std::invalid_argument("split: a (label, sensitive) stratum has fewer than 2 rows");
    std::shuffle(s.begin(), s.end(), rng);
    auto k = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(s.size())));
    k = std::clamp<std::size_t>(k, 1, s.size() - 1);
    test.insert(test.end(), s.begin(), s.begin() + static_cast<long>(k));
    train.insert(train.end(), s.begin() + static_cast<long>(k), s.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  if (!data.raw) return {data.subset(train), data.subset(test)};

  std::vector<std::size_t> raw_train, raw_test;
  for (std::size_t i : train) raw_train.push_back(data.raw_rows[i]);
  for (std::size_t i : test) raw_test.push_back(data.raw_rows[i]);
  Preprocessing prep = Preprocessing::fit(*data.raw, raw_train);
  Split out;
  out.train = build(data.raw, raw_train, prep, data.group_levels, nullptr);
  out.test = build(data.raw, raw_test, prep, data.group_levels, nullptr);
  return out;
}

Dataset make_synthetic(const SyntheticParams& p) {
  if (p.n_p < 1 || p.n_u < 1 || p.dim < 2) throw std::invalid_argument("make_synthetic: sizes must be positive, dim >= 2");
  if (!(p.sd > 0.0) || !(p.spread > 0.0) || p.overlap < 0.0 || p.overlap > 1.0) throw std::invalid_argument("make_synthetic: bad sd/overlap");
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> gauss(0.0, p.sd);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Dataset d;
  const long n = p.n_p + p.n_u;
  d.features.resize(n, p.dim);
  for (long i = 0; i < n; ++i) {
    const bool majority = i < p.n_p;
    const bool majority_only = majority && unif(rng) >= p.overlap;
    for (int j = 0; j < p.dim; ++j) d.features(i, j) = gauss(rng);
    d.features(i, 0) *= p.spread / p.sd;
    if (majority_only) d.features(i, 0) += p.group_shift;
    const double threshold = (majority_only ? p.shifted_class_sep : p.class_sep) * p.sd;
    d.labels.push_back(d.features(i, 1) > threshold ? 1 : 0);
    d.sensitive.push_back(majority ? 1 : 0);
    d.group.push_back(majority ? 1 : 0);
  }
  d.group_levels = {"minority", "majority"};
  for (int j = 0; j < p.dim; ++j) d.feature_names.push_back("x" + std::to_string(j));
  return d;
}

Dataset inject_label_noise(const Dataset& data, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw std::invalid_argument("inject_label_noise: ratio must be in [0,1]");
  const long total = std::llround(ratio * static_cast<double>(data.n()));
  const long flips_p = (total + 1) / 2;
  const long flips_u = total / 2;
  auto maj = data.majority_indices();
  auto min = data.minority_indices();
  if (flips_p > static_cast<long>(maj.size()) || flips_u > static_cast<long>(min.size()))
    throw std::invalid_argument("inject_label_noise: more flips than rows in a group");
  std::mt19937_64 rng(seed);
  std::shuffle(maj.begin(), maj.end(), rng);
  std::shuffle(min.begin(), min.end(), rng);
  Dataset out = data;
  for (long i = 0; i < flips_p; ++i) out.labels[maj[static_cast<std::size_t>(i)]] ^= 1;
  for (long i = 0; i < flips_u; ++i) out.labels[min[static_cast<std::size_t>(i)]] ^= 1;
  return out;
}

Dataset undersample(const Dataset& data, std::uint64_t seed) {
  data.validate(false);
  auto maj = data.majority_indices();
  const auto min = data.minority_indices();
  std::mt19937_64 rng(seed);
  std::shuffle(maj.begin(), maj.end(), rng);
  maj.resize(std::min(maj.size(), min.size()));
  std::sort(maj.begin(), maj.end());
  std::vector<std::size_t> rows = maj;
  rows.insert(rows.end(), min.begin(), min.end());
  return data.subset(rows);
}

Dataset oversample(const Dataset& data, std::uint64_t seed) {
  data.validate(false);
  const auto maj = data.majority_indices();
  auto min = data.minority_indices();
  std::vector<std::size_t> rows = maj;
  const std::size_t reps = maj.size() / min.size();
  for (std::size_t r = 0; r < reps; ++r) rows.insert(rows.end(), min.begin(), min.end());
  std::mt19937_64 rng(seed);
  std::shuffle(min.begin(), min.end(), rng);
  rows.insert(rows.end(), min.begin(), min.begin() + static_cast<long>(maj.size() - reps * min.size()));
  return data.subset(rows);
}

WeightVector reweighing_weights(const Dataset& data) { return uniform_weights(data.n_p(), data.n_u(), 0.0); }

std::vector<SubgroupView> multi_group_prepare(const Dataset& data, const std::string& reference_level) {
  const auto it = std::find(data.group_levels.begin(), data.group_levels.end(), reference_level);
  if (it == data.group_levels.end()) throw std::invalid_argument("reference level '" + reference_level + "' not present");
  if (data.group_levels.size() < 2) throw std::invalid_argument("multi-group data needs at least two levels");
  const int ref = static_cast<int>(it - data.group_levels.begin());
  std::vector<std::size_t> ref_rows;
  for (std::size_t i = 0; i < data.n(); ++i)
    if (data.group[i] == ref) ref_rows.push_back(i);
  if (ref_rows.empty()) throw std::invalid_argument("reference subgroup is empty");

  std::vector<SubgroupView> views;
  for (int g = 0; g < static_cast<int>(data.group_levels.size()); ++g) {
    if (g == ref) continue;
    SubgroupView v;
    v.level = data.group_levels[static_cast<std::size_t>(g)];
    v.level_index = g;
    for (std::size_t i = 0; i < data.n(); ++i)
      if (data.group[i] == g) v.rows.push_back(i);
    if (v.rows.empty()) throw std::invalid_argument("subgroup '" + v.level + "' is empty");
    const std::size_t n_sub = v.rows.size();
    v.rows.insert(v.rows.end(), ref_rows.begin(), ref_rows.end());
    v.data = data.subset(v.rows);
    for (std::size_t i = 0; i < v.data.n(); ++i) v.data.sensitive[i] = i < n_sub ? 1 : 0;
    views.push_back(std::move(v));
  }
  return views;
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

constexpr char kCacheMagic[4] = {'A', 'R', 'W', 'D'};
constexpr std::uint32_t kCacheVersion = 1;

struct Writer {
  std::string buf;
  template <class T>
  void pod(const T& v) { buf.append(reinterpret_cast<const char*>(&v), sizeof v); }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    buf += s;
  }
  void strings(const std::vector<std::string>& v) {
    pod<std::uint64_t>(v.size());
    for (const auto& s : v) str(s);
  }
  void ints(const std::vector<int>& v) {
    pod<std::uint64_t>(v.size());
    buf.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(int));
  }
};

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  template <class T>
  T pod() {
    if (pos + sizeof(T) > buf.size()) throw std::runtime_error("dataset cache truncated");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof v);
    pos += sizeof v;
    return v;
  }
  std::uint64_t count() {
    const auto n = pod<std::uint64_t>();
    if (n > buf.size()) throw std::runtime_error("dataset cache corrupt length");
    return n;
  }
  std::string str() {
    const auto n = count();
    if (pos + n > buf.size()) throw std::runtime_error("dataset cache truncated");
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  std::vector<std::string> strings() {
    std::vector<std::string> v(count());
    for (auto& s : v) s = str();
    return v;
  }
  std::vector<int> ints() {
    std::vector<int> v(count());
    for (auto& x : v) x = pod<int>();
    return v;
  }
};

}  // namespace

void save_dataset_cache(const Dataset& data, const std::string& path) {
  Writer w;
  w.pod<std::uint64_t>(static_cast<std::uint64_t>(data.features.rows()));
  w.pod<std::uint64_t>(static_cast<std::uint64_t>(data.features.cols()));
  for (Eigen::Index r = 0; r < data.features.rows(); ++r)
    for (Eigen::Index c = 0; c < data.features.cols(); ++c) w.pod<double>(data.features(r, c));
  w.ints(data.labels);
  w.ints(data.sensitive);
  w.ints(data.group);
  w.strings(data.group_levels);
  w.strings(data.feature_names);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kCacheMagic, 4);
  out.write(reinterpret_cast<const char*>(&kCacheVersion), sizeof kCacheVersion);
  const std::uint64_t sum = fnv1a(w.buf.data(), w.buf.size());
  out.write(reinterpret_cast<const char*>(&sum), sizeof sum);
  out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

Dataset load_dataset_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t sum = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&sum), sizeof sum);
  if (!in || std::memcmp(magic, kCacheMagic, 4) != 0) throw std::runtime_error(path + ": not a dataset cache");
  if (version != kCacheVersion) throw std::runtime_error(path + ": unsupported cache version " + std::to_string(version));
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (fnv1a(buf.data(), buf.size()) != sum) throw std::runtime_error(path + ": checksum mismatch");

  Reader r{buf};
  Dataset d;
  const auto rows = r.pod<std::uint64_t>();
  const auto cols = r.pod<std::uint64_t>();
  if (rows * cols * sizeof(double) > buf.size()) throw std::runtime_error(path + ": corrupt shape");
  d.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < d.features.rows(); ++i)
    for (Eigen::Index j = 0; j < d.features.cols(); ++j) d.features(i, j) = r.pod<double>();
  d.labels = r.ints();
  d.sensitive = r.ints();
  d.group = r.ints();
  d.group_levels = r.strings();
  d.feature_names = r.strings();
  d.validate(false);
  return d;
}

}  // namespace arw
