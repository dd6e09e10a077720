#include "arw/experiment.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> out, method, dataset, distance, target;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  std::optional<double> T;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "Experiment config file")->required()->check(CLI::ExistingFile);
  app->add_option("--out", o.out, "Output directory");
  app->add_option("--seed", o.seed, "Base seed");
  app->add_option("--reps", o.reps, "Repetitions");
  app->add_option("--method", o.method, "baseline|reweighing|undersampling|oversampling|adversarial");
  app->add_option("--dataset", o.dataset, "Dataset path (csv or cache)");
  app->add_option("--t", o.T, "Weight-set radius T");
  app->add_option("--distance", o.distance, "wasserstein|mmd");
  app->add_option("--target", o.target, "majority|minority|both");
}

arw::ExperimentConfig load(const Overrides& o) {
  arw::ConfigMap m = arw::read_config_file(o.config);
  if (o.out) m["experiment.out"] = *o.out;
  if (o.seed) m["experiment.seed"] = std::to_string(*o.seed);
  if (o.reps) m["experiment.repetitions"] = std::to_string(*o.reps);
  if (o.method) {
    m["experiment.method"] = *o.method;
    if (*o.method != "adversarial")
      for (const char* k : {"train.T", "train.distance", "train.target"}) m.erase(k);
  }
  if (o.dataset) m["dataset.path"] = fs::absolute(*o.dataset).string();
  if (o.T) {
    std::ostringstream s;
    s << *o.T;
    m["train.T"] = s.str();
  }
  if (o.distance) m["train.distance"] = *o.distance;
  if (o.target) m["train.target"] = *o.target;
  return arw::experiment_from_config(m, fs::path(o.config).parent_path().string());
}

void emit(const std::string& out_dir, const std::string& file, const std::string& text) {
  std::cout << text;
  if (out_dir.empty()) return;
  fs::create_directories(out_dir);
  std::ofstream f(fs::path(out_dir) / file);
  if (!(f << text)) throw std::runtime_error("cannot write " + (fs::path(out_dir) / file).string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial reweighting experiments"};
  app.require_subcommand(1);

  Overrides run_o, sweep_t_o, noise_o, ablate_o, dist_o, multi_o;
  auto* run = app.add_subcommand("run", "Repeated train/evaluate runs");
  add_common(run, run_o);

  auto* sweep_t = app.add_subcommand("sweep-t", "Sweep the weight-set radius T");
  add_common(sweep_t, sweep_t_o);
  std::string t_values = "1,3,5,7,10";
  sweep_t->add_option("--values", t_values, "Comma-separated T values");

  auto* sweep_noise = app.add_subcommand("sweep-noise", "Sweep the label-noise ratio");
  add_common(sweep_noise, noise_o);
  std::string ratios = "0,0.1,0.2,0.3";
  std::string methods = "baseline,adversarial";
  sweep_noise->add_option("--ratios", ratios, "Comma-separated noise ratios");
  sweep_noise->add_option("--methods", methods, "Comma-separated methods");

  auto* ablate = app.add_subcommand("ablate", "Ablate the distance or the reweighted group");
  add_common(ablate, ablate_o);
  std::string axis;
  ablate->add_option("--axis", axis, "distance|reweight_target")->required();

  auto* dist = app.add_subcommand("report-distances", "Exact latent W1 before and after reweighting");
  add_common(dist, dist_o);

  auto* multi = app.add_subcommand("multi-group", "Several sensitive levels against a reference level");
  add_common(multi, multi_o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const auto cfg = load(run_o);
      const auto runs = arw::run(cfg);
      std::cout << arw::table_csv({arw::aggregate(arw::method_name(cfg.method), runs)});
    } else if (sweep_t->parsed()) {
      const auto cfg = load(sweep_t_o);
      const auto rows = arw::sweep_T(cfg, arw::parse_double_list(t_values));
      std::vector<arw::AggregateRow> table;
      for (const auto& r : rows) table.push_back(r.row);
      emit(cfg.out_dir, "sweep_t.csv", arw::table_csv(table));
      emit(cfg.out_dir, "sweep_t_long.csv", arw::sweep_long_csv("T", rows));
    } else if (sweep_noise->parsed()) {
      const auto cfg = load(noise_o);
      std::vector<arw::Method> ms;
      for (const auto& m : arw::split_list(methods)) ms.push_back(arw::parse_method(m));
      const auto rows = arw::sweep_noise(cfg, arw::parse_double_list(ratios), ms);
      std::vector<arw::AggregateRow> table;
      for (const auto& r : rows) table.push_back(r.row);
      emit(cfg.out_dir, "sweep_noise.csv", arw::table_csv(table));
      emit(cfg.out_dir, "sweep_noise_long.csv", arw::sweep_long_csv("noise_ratio", rows));
    } else if (ablate->parsed()) {
      const auto cfg = load(ablate_o);
      const auto rows = arw::ablate(cfg, axis);
      std::vector<arw::AggregateRow> table;
      std::ostringstream w1;
      w1 << "arm,final_w1\n";
      for (const auto& r : rows) {
        table.push_back(r.row);
        w1 << r.arm << ',' << r.final_w1 << '\n';
      }
      emit(cfg.out_dir, "ablation.csv", arw::table_csv(table));
      emit(cfg.out_dir, "ablation_w1.csv", w1.str());
    } else if (dist->parsed()) {
      const auto cfg = load(dist_o);
      std::cout << arw::report_distances(cfg).to_json() << '\n';
    } else if (multi->parsed()) {
      const auto cfg = load(multi_o);
      const auto rows = arw::run_multigroup(cfg);
      std::cout << "seed,baseline_accuracy,baseline_pair_di,method_accuracy,method_pair_di\n";
      for (const auto& r : rows)
        std::cout << r.seed << ',' << r.baseline_accuracy << ',' << r.baseline_pair_di << ',' << r.method_accuracy
                  << ',' << r.method_pair_di << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
