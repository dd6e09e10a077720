#include "arw/experiment.hpp"

#include "arw/multigroup.hpp"
#include "arw/otoracle.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace arw {

namespace fs = std::filesystem;

const char* method_name(Method m) {
  switch (m) {
    case Method::Baseline: return "baseline";
    case Method::Reweighing: return "reweighing";
    case Method::Undersampling: return "undersampling";
    case Method::Oversampling: return "oversampling";
    case Method::Adversarial: return "adversarial";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  for (auto m : {Method::Baseline, Method::Reweighing, Method::Undersampling, Method::Oversampling, Method::Adversarial})
    if (s == method_name(m)) return m;
  throw std::invalid_argument("unknown method '" + s + "'");
}

void ExperimentConfig::validate() const {
  train.validate();
  if (repetitions < 1) throw std::invalid_argument("repetitions must be positive");
  if (dataset.kind != "csv" && dataset.kind != "synthetic" && dataset.kind != "cache")
    throw std::invalid_argument("dataset.kind must be csv, synthetic or cache");
  if (dataset.kind != "synthetic" && dataset.path.empty()) throw std::invalid_argument("dataset.path is required");
  if (dataset.kind == "csv") dataset.schema.validate();
  if (!(dataset.test_fraction > 0.0 && dataset.test_fraction < 1.0))
    throw std::invalid_argument("dataset.test_fraction must be in (0,1)");
  if (!(dataset.label_noise >= 0.0 && dataset.label_noise <= 1.0))
    throw std::invalid_argument("dataset.label_noise must be in [0,1]");
  if (method != Method::Adversarial) {
    for (const char* k : {"train.T", "train.distance", "train.target"})
      if (source.count(k)) throw std::invalid_argument(std::string(k) + " only applies to method=adversarial");
  }
  for (const auto& m : metrics)
    if (m != "accuracy" && m != "disparate_impact" && m != "disparate_fpr" && m != "disparate_fnr")
      throw std::invalid_argument("unknown metric '" + m + "'");
}

ExperimentConfig experiment_from_config(const ConfigMap& m, const std::string& base_dir) {
  ExperimentConfig c;
  c.source = m;
  std::vector<std::string> continuous, categorical, ignore;
  std::string label, positive, sensitive, majority;
  bool sensitive_as_feature = true;
  std::string missing = "?";
  auto& t = c.train;
  auto& syn = c.dataset.synthetic;

  auto i = [](int& dst) { return [&dst](const std::string& v) { dst = std::stoi(v); }; };
  auto l = [](long& dst) { return [&dst](const std::string& v) { dst = std::stol(v); }; };
  auto d = [](double& dst) { return [&dst](const std::string& v) { dst = std::stod(v); }; };
  auto u = [](std::uint64_t& dst) { return [&dst](const std::string& v) { dst = std::stoull(v); }; };
  auto s = [](std::string& dst) { return [&dst](const std::string& v) { dst = v; }; };
  auto list = [](std::vector<std::string>& dst) { return [&dst](const std::string& v) { dst = split_list(v); }; };
  auto ints = [](std::vector<int>& dst) { return [&dst](const std::string& v) { dst = parse_int_list(v); }; };

  const std::map<std::string, std::function<void(const std::string&)>> setters = {
      {"experiment.name", s(c.name)},
      {"experiment.method", [&](const std::string& v) { c.method = parse_method(v); }},
      {"experiment.repetitions", i(c.repetitions)},
      {"experiment.seed", u(c.base_seed)},
      {"experiment.out", s(c.out_dir)},
      {"experiment.metrics", list(c.metrics)},
      {"dataset.kind", s(c.dataset.kind)},
      {"dataset.path", s(c.dataset.path)},
      {"dataset.test_fraction", d(c.dataset.test_fraction)},
      {"dataset.label_noise", d(c.dataset.label_noise)},
      {"dataset.label", s(label)},
      {"dataset.positive", s(positive)},
      {"dataset.sensitive", s(sensitive)},
      {"dataset.majority", s(majority)},
      {"dataset.continuous", list(continuous)},
      {"dataset.categorical", list(categorical)},
      {"dataset.ignore", list(ignore)},
      {"dataset.sensitive_as_feature", [&](const std::string& v) { sensitive_as_feature = parse_bool(v); }},
      {"dataset.missing", s(missing)},
      {"dataset.reference", s(c.reference_level)},
      {"dataset.pair", [&](const std::string& v) {
         const auto p = split_list(v);
         if (p.size() != 2) throw std::invalid_argument("dataset.pair needs two levels");
         c.pair_first = p[0];
         c.pair_second = p[1];
       }},
      {"synthetic.n_p", l(syn.n_p)},
      {"synthetic.n_u", l(syn.n_u)},
      {"synthetic.dim", i(syn.dim)},
      {"synthetic.group_shift", d(syn.group_shift)},
      {"synthetic.class_sep", d(syn.class_sep)},
      {"synthetic.shifted_class_sep", d(syn.shifted_class_sep)},
      {"synthetic.sd", d(syn.sd)},
      {"synthetic.overlap", d(syn.overlap)},
      {"synthetic.spread", d(syn.spread)},
      {"synthetic.seed", u(syn.seed)},
      {"train.steps_classifier_per_round", i(t.steps_classifier_per_round)},
      {"train.critic_steps_per_round", i(t.critic_steps_per_round)},
      {"train.batch_majority", i(t.batch_majority)},
      {"train.batch_minority", i(t.batch_minority)},
      {"train.critic_batch", i(t.critic_batch)},
      {"train.epochs", i(t.epochs)},
      {"train.lr_classifier", d(t.lr_classifier)},
      {"train.lr_exponent", d(t.lr_exponent)},
      {"train.lr_critic", d(t.lr_critic)},
      {"train.momentum", d(t.momentum)},
      {"train.gp_coefficient", d(t.gp_coefficient)},
      {"train.T", d(t.T)},
      {"train.distance", [&](const std::string& v) { t.distance = parse_distance(v); }},
      {"train.target", [&](const std::string& v) { t.reweight_target = parse_target(v); }},
      {"train.extractor_hidden", ints(t.extractor_hidden)},
      {"train.classifier_hidden", ints(t.classifier_hidden)},
      {"train.critic_hidden", ints(t.critic_hidden)},
      {"train.audit_every", i(t.audit_every)},
      {"train.audit_points", i(t.audit_points)},
      {"train.mmd_sigma", d(t.mmd_sigma)},
      {"train.mmd_iterations", i(t.mmd_iterations)},
      {"train.mmd_features", i(t.mmd_features)},
      {"train.mmd_exact_limit", l(t.mmd_exact_limit)},
  };
  for (const auto& [k, v] : m) {
    const auto it = setters.find(k);
    if (it == setters.end()) throw std::invalid_argument("unknown config key '" + k + "'");
    try {
      it->second(v);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config key '" + k + "': " + e.what());
    } catch (const std::out_of_range&) {
      throw std::invalid_argument("config key '" + k + "': value out of range");
    }
  }

  if (!c.dataset.path.empty() && fs::path(c.dataset.path).is_relative() && !base_dir.empty())
    c.dataset.path = (fs::path(base_dir) / c.dataset.path).lexically_normal().string();
  if (c.dataset.kind == "csv") {
    auto& cols = c.dataset.schema.columns;
    for (const auto& n : continuous) cols.push_back({n, ColumnKind::Continuous, {}, {}});
    for (const auto& n : categorical) cols.push_back({n, ColumnKind::Categorical, {}, {}});
    for (const auto& n : ignore) cols.push_back({n, ColumnKind::Ignore, {}, {}});
    cols.push_back({label, ColumnKind::Label, split_list(positive), {}});
    cols.push_back({sensitive, ColumnKind::Sensitive, {}, split_list(majority)});
    c.dataset.schema.sensitive_as_feature = sensitive_as_feature;
    c.dataset.schema.missing_marker = missing;
  }
  c.validate();
  return c;
}

Dataset load_dataset(const DatasetSpec& spec) {
  if (spec.kind == "synthetic") return make_synthetic(spec.synthetic);
  if (spec.kind == "cache") return load_dataset_cache(spec.path);
  LoadReport report;
  Dataset d = load_csv(spec.path, spec.schema, &report);
  if (report.dropped_missing + report.dropped_malformed > 0)
    std::cerr << spec.path << ": " << report.rows_read << " rows kept, " << report.dropped_missing
              << " dropped for missing values, " << report.dropped_malformed << " malformed\n";
  return d;
}

TrainConfig method_train_config(const ExperimentConfig& cfg, const Dataset& train_split, const Dataset& used) {
  TrainConfig t = cfg.train;
  switch (cfg.method) {
    case Method::Baseline:
    case Method::Undersampling:
    case Method::Oversampling: t.weight_mode = WeightMode::Ones; break;
    case Method::Reweighing: t.weight_mode = WeightMode::Uniform; break;
    case Method::Adversarial: t.weight_mode = WeightMode::Adversarial; break;
  }
  if (cfg.method == Method::Undersampling || cfg.method == Method::Oversampling) {
    auto rescale = [](int batch, long now, long before) {
      return std::max(1, static_cast<int>(std::lround(batch * static_cast<double>(now) / static_cast<double>(before))));
    };
    t.batch_majority = rescale(t.batch_majority, used.n_p(), train_split.n_p());
    t.batch_minority = rescale(t.batch_minority, used.n_u(), train_split.n_u());
  }
  return t;
}

namespace {

Matrix rows_of(const Matrix& x, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw std::runtime_error("cannot create output directory " + p.string());
}

std::vector<int> labels_of(const std::vector<Prediction>& p) {
  std::vector<int> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i].label;
  return out;
}

WeightedPointCloud majority_cloud(const TrainState& s, const Dataset& data) {
  return {embed(s, rows_of(data.features, s.majority_rows)), s.weights.values};
}

WeightedPointCloud minority_cloud(const TrainState& s, const Dataset& data) {
  return {embed(s, rows_of(data.features, s.minority_rows)), s.minority_weights.values};
}

}  // namespace

RunRecord run_once(const ExperimentConfig& cfg, const Dataset& train_split, const Dataset& test, std::uint64_t seed,
                   const std::string& run_dir, TrainState* state_out) {
  const auto start = std::chrono::steady_clock::now();
  Dataset used = cfg.dataset.label_noise > 0.0 ? inject_label_noise(train_split, cfg.dataset.label_noise, seed)
                                               : train_split;
  if (cfg.method == Method::Undersampling) used = undersample(used, seed);
  if (cfg.method == Method::Oversampling) used = oversample(used, seed);
  TrainConfig tc = method_train_config(cfg, train_split, used);
  tc.seed = seed;
  TrainState state = train(used, tc);

  RunRecord rec;
  rec.config_hash = hash_hex(config_hash(cfg.source));
  rec.seed = seed;
  rec.report = evaluate(predict(state, test.features), test.labels, test.sensitive);
  rec.loss_history = state.loss_history;
  rec.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!run_dir.empty()) {
    const fs::path dir(run_dir);
    ensure_dir(dir);
    write_file(dir / "config.ini", write_config_text(cfg.source));
    auto j = nlohmann::json::parse(to_json(rec.report));
    j["method"] = method_name(cfg.method);
    j["seed"] = seed;
    j["config_hash"] = rec.config_hash;
    j["wall_clock_seconds"] = rec.wall_clock_seconds;
    j["loss_history"] = rec.loss_history;
    write_file(dir / "metrics.json", j.dump(2) + "\n");
    write_file(dir / "table.csv", to_csv(rec.report));
    std::ostringstream log;
    write_round_log(log, state.log);
    rec.round_log_path = (dir / "round_log.csv").string();
    write_file(rec.round_log_path, log.str());
    if (cfg.method == Method::Adversarial) {
      const Matrix d = state.critic.forward(embed(state, rows_of(used.features, state.majority_rows)));
      std::ostringstream w;
      write_weights_csv(w, std::vector<double>(d.data(), d.data() + d.rows()), state.weights);
      rec.weights_path = (dir / "weights.csv").string();
      write_file(rec.weights_path, w.str());
    }
  }
  if (state_out) *state_out = std::move(state);
  return rec;
}

AggregateRow aggregate(const std::string& label, const std::vector<RunRecord>& runs) {
  AggregateRow r;
  r.label = label;
  r.runs = static_cast<int>(runs.size());
  std::vector<double> acc, di, adi, fpr, fnr;
  for (const auto& x : runs) {
    acc.push_back(x.report.accuracy);
    di.push_back(x.report.disparate_impact);
    adi.push_back(std::abs(x.report.disparate_impact));
    if (x.report.disparate_fpr) fpr.push_back(*x.report.disparate_fpr);
    if (x.report.disparate_fnr) fnr.push_back(*x.report.disparate_fnr);
  }
  r.accuracy = summarize_percent(acc);
  r.disparate_impact = summarize_percent(di);
  r.abs_disparate_impact = summarize_percent(adi);
  r.disparate_fpr = summarize_percent(fpr);
  r.disparate_fnr = summarize_percent(fnr);
  return r;
}

std::string table_csv(const std::vector<AggregateRow>& rows) {
  std::ostringstream out;
  out << "method,Accuracy,Disparate Impact,Disparate FPR,Disparate FNR,|Disparate Impact|,runs\n";
  for (const auto& r : rows)
    out << r.label << ',' << r.accuracy.cell() << ',' << r.disparate_impact.cell() << ',' << r.disparate_fpr.cell()
        << ',' << r.disparate_fnr.cell() << ',' << r.abs_disparate_impact.cell() << ',' << r.runs << '\n';
  return out.str();
}

namespace {

std::vector<RunRecord> run_on(const ExperimentConfig& cfg, const Dataset& data, const std::string& out_dir) {
  std::vector<RunRecord> runs;
  for (int k = 0; k < cfg.repetitions; ++k) {
    const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(k);
    const Split sp = split(data, cfg.dataset.test_fraction, seed);
    const std::string dir = out_dir.empty() ? "" : (fs::path(out_dir) / ("rep_" + std::to_string(k))).string();
    runs.push_back(run_once(cfg, sp.train, sp.test, seed, dir));
  }
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_file(fs::path(out_dir) / "summary.csv", table_csv({aggregate(method_name(cfg.method), runs)}));
    write_file(fs::path(out_dir) / "config.ini", write_config_text(cfg.source));
  }
  return runs;
}

std::string number_label(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

ExperimentConfig with_method(const ExperimentConfig& cfg, Method m) {
  ExperimentConfig c = cfg;
  c.method = m;
  c.source["experiment.method"] = method_name(m);
  if (m != Method::Adversarial) {
    c.source.erase("train.T");
    c.source.erase("train.distance");
    c.source.erase("train.target");
  }
  return c;
}

}  // namespace

std::vector<RunRecord> run(const ExperimentConfig& cfg) {
  cfg.validate();
  return run_on(cfg, load_dataset(cfg.dataset), cfg.out_dir);
}

std::vector<SweepRow> sweep_T(const ExperimentConfig& cfg, const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("sweep_T: empty value list");
  if (cfg.method != Method::Adversarial) throw std::invalid_argument("sweep_T needs method=adversarial");
  const Dataset data = load_dataset(cfg.dataset);
  std::vector<SweepRow> rows;
  for (double T : values) {
    ExperimentConfig c = cfg;
    c.train.T = T;
    c.source["train.T"] = number_label(T);
    c.validate();
    SweepRow r;
    r.value = T;
    r.method = method_name(c.method);
    r.runs = run_on(c, data, cfg.out_dir.empty() ? "" : (fs::path(cfg.out_dir) / ("T_" + number_label(T))).string());
    r.row = aggregate("T=" + number_label(T), r.runs);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SweepRow> sweep_noise(const ExperimentConfig& cfg, const std::vector<double>& ratios,
                                  const std::vector<Method>& methods) {
  if (ratios.empty()) throw std::invalid_argument("sweep_noise: empty ratio list");
  for (double r : ratios)
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("sweep_noise: ratio outside [0,1]");
  const Dataset data = load_dataset(cfg.dataset);
  std::vector<SweepRow> rows;
  for (double ratio : ratios) {
    for (Method m : methods) {
      ExperimentConfig c = with_method(cfg, m);
      c.dataset.label_noise = ratio;
      c.source["dataset.label_noise"] = number_label(ratio);
      c.validate();
      SweepRow r;
      r.value = ratio;
      r.method = method_name(m);
      const std::string dir = cfg.out_dir.empty()
                                  ? ""
                                  : (fs::path(cfg.out_dir) / ("noise_" + number_label(ratio) + "_" + r.method)).string();
      r.runs = run_on(c, data, dir);
      r.row = aggregate(r.method + "@" + number_label(ratio), r.runs);
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

std::string sweep_long_csv(const std::string& parameter, const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << parameter << ",method,seed,accuracy,disparate_impact,disparate_fpr,disparate_fnr\n";
  out.precision(10);
  for (const auto& r : rows)
    for (const auto& run : r.runs) {
      out << r.value << ',' << r.method << ',' << run.seed << ',' << run.report.accuracy << ','
          << run.report.disparate_impact << ',';
      if (run.report.disparate_fpr) out << *run.report.disparate_fpr;
      out << ',';
      if (run.report.disparate_fnr) out << *run.report.disparate_fnr;
      out << '\n';
    }
  return out.str();
}

std::vector<AblationRow> ablate(const ExperimentConfig& cfg, const std::string& axis) {
  if (cfg.method != Method::Adversarial) throw std::invalid_argument("ablate needs method=adversarial");
  std::vector<ExperimentConfig> arms;
  std::vector<std::string> names;
  if (axis == "distance") {
    for (auto d : {DistanceKind::Wasserstein, DistanceKind::Mmd}) {
      ExperimentConfig c = cfg;
      c.train.distance = d;
      c.train.reweight_target = ReweightTarget::Majority;
      c.source["train.distance"] = distance_name(d);
      c.source.erase("train.target");
      arms.push_back(c);
      names.push_back(distance_name(d));
    }
  } else if (axis == "reweight_target") {
    for (auto t : {ReweightTarget::Majority, ReweightTarget::Minority, ReweightTarget::Both}) {
      ExperimentConfig c = cfg;
      c.train.reweight_target = t;
      c.train.distance = DistanceKind::Wasserstein;
      c.source["train.target"] = target_name(t);
      c.source["train.distance"] = "wasserstein";
      arms.push_back(c);
      names.push_back(target_name(t));
    }
  } else {
    throw std::invalid_argument("unknown ablation axis '" + axis + "'");
  }

  const Dataset data = load_dataset(cfg.dataset);
  std::vector<AblationRow> rows;
  for (std::size_t a = 0; a < arms.size(); ++a) {
    arms[a].validate();
    AblationRow row;
    row.arm = names[a];
    double w1 = 0.0;
    for (int k = 0; k < cfg.repetitions; ++k) {
      const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(k);
      const Split sp = split(data, cfg.dataset.test_fraction, seed);
      TrainState state;
      const std::string dir =
          cfg.out_dir.empty() ? "" : (fs::path(cfg.out_dir) / row.arm / ("rep_" + std::to_string(k))).string();
      row.runs.push_back(run_once(arms[a], sp.train, sp.test, seed, dir, &state));
      w1 += subsampled_wasserstein(majority_cloud(state, sp.train), minority_cloud(state, sp.train), 1,
                                   static_cast<std::size_t>(cfg.train.audit_points), 5, seed)
                .mean;
    }
    row.final_w1 = w1 / cfg.repetitions;
    row.row = aggregate(row.arm, row.runs);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string DistanceReport::to_json() const {
  auto side = [](const DistanceSide& s) {
    return nlohmann::json{{"w1_exact", s.w1_exact}, {"w1_sd", s.w1_sd}, {"critic_estimate", s.critic_estimate}};
  };
  nlohmann::json j;
  j["p"] = 1;
  j["before"] = side(before);
  j["after"] = side(after);
  j["ratio"] = before.w1_exact > 0.0 ? nlohmann::json(after.w1_exact / before.w1_exact) : nlohmann::json();
  j["subsample_size"] = subsample_size;
  j["repeats"] = repeats;
  j["seed"] = seed;
  return j.dump(2);
}

std::string DistanceReport::json_lines() const {
  return distance_report_line("before", 1, before.w1_exact, subsample_size, seed) + "\n" +
         distance_report_line("after", 1, after.w1_exact, subsample_size, seed) + "\n";
}

DistanceReport report_distances(const ExperimentConfig& cfg) {
  if (cfg.method != Method::Adversarial) throw std::invalid_argument("report-distances needs method=adversarial");
  const Dataset data = load_dataset(cfg.dataset);
  const Split sp = split(data, cfg.dataset.test_fraction, cfg.base_seed);
  DistanceReport r;
  r.seed = cfg.base_seed;
  const auto points = static_cast<std::size_t>(cfg.train.audit_points);

  auto measure = [&](double T) {
    TrainConfig tc = cfg.train;
    tc.T = T;
    tc.seed = cfg.base_seed;
    tc.weight_mode = WeightMode::Adversarial;
    const TrainState s = train(sp.train, tc);
    const auto a = majority_cloud(s, sp.train);
    const auto b = minority_cloud(s, sp.train);
    const auto w = subsampled_wasserstein(a, b, 1, points, r.repeats, cfg.base_seed);
    r.subsample_size = w.subsample_size;
    return DistanceSide{w.mean, w.sd, critic_distance_estimate(s.critic, a, b)};
  };
  r.before = measure(0.0);
  r.after = measure(cfg.train.T);

  if (!cfg.out_dir.empty()) {
    ensure_dir(cfg.out_dir);
    write_file(fs::path(cfg.out_dir) / "distances.json", r.to_json() + "\n");
    write_file(fs::path(cfg.out_dir) / "distances.jsonl", r.json_lines());
  }
  return r;
}

std::vector<MultiGroupRow> run_multigroup(const ExperimentConfig& cfg) {
  if (cfg.reference_level.empty() || cfg.pair_first.empty())
    throw std::invalid_argument("multi-group runs need dataset.reference and dataset.pair");
  const Dataset data = load_dataset(cfg.dataset);
  auto level = [&](const std::string& name) {
    const auto it = std::find(data.group_levels.begin(), data.group_levels.end(), name);
    if (it == data.group_levels.end()) throw std::invalid_argument("level '" + name + "' not in data");
    return static_cast<int>(it - data.group_levels.begin());
  };
  const int first = level(cfg.pair_first), second = level(cfg.pair_second);
  std::vector<MultiGroupRow> rows;
  for (int k = 0; k < cfg.repetitions; ++k) {
    MultiGroupRow row;
    row.seed = cfg.base_seed + static_cast<std::uint64_t>(k);
    const Split sp = split(data, cfg.dataset.test_fraction, row.seed);
    TrainConfig tc = cfg.train;
    tc.seed = row.seed;
    auto score = [&](const MultiGroupState& s, double& acc, double& di) {
      const auto pred = labels_of(predict(s, sp.test.features));
      long correct = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == sp.test.labels[i];
      acc = static_cast<double>(correct) / static_cast<double>(pred.size());
      di = pairwise_disparate_impact(pred, sp.test.group, first, second);
    };
    tc.weight_mode = WeightMode::Ones;
    score(train_multigroup(sp.train, cfg.reference_level, tc), row.baseline_accuracy, row.baseline_pair_di);
    tc.weight_mode = WeightMode::Adversarial;
    score(train_multigroup(sp.train, cfg.reference_level, tc), row.method_accuracy, row.method_pair_di);
    rows.push_back(row);
  }
  if (!cfg.out_dir.empty()) {
    ensure_dir(cfg.out_dir);
    std::ostringstream out;
    out << "seed,baseline_accuracy,baseline_pair_di,method_accuracy,method_pair_di\n";
    out.precision(10);
    for (const auto& r : rows)
      out << r.seed << ',' << r.baseline_accuracy << ',' << r.baseline_pair_di << ',' << r.method_accuracy << ','
          << r.method_pair_di << '\n';
    write_file(fs::path(cfg.out_dir) / "multigroup.csv", out.str());
    write_file(fs::path(cfg.out_dir) / "config.ini", write_config_text(cfg.source));
  }
  return rows;
}

}  // namespace arw
