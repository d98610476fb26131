// helltrust: dataset stats, implicit trust extraction and cross-validated
// rating-prediction experiments.
//
// Exit codes: 0 ok, 1 other failure, 2 input error, 3 degenerate
// extraction, 4 training divergence.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "helltrust/helltrust.hpp"

namespace fs = std::filesystem;
using namespace helltrust;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitInput = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitDivergence = 4;

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return in;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ParseError(std::string(what) + " path is required");
  if (!fs::is_regular_file(path)) throw ParseError(std::string(what) + " file '" + path + "' not found");
}

RatingDataset load_ratings(const std::string& path, RatingScale scale) {
  require_file(path, "ratings");
  auto in = open_input(path);
  try {
    return parse_ratings(in, scale);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

ParsedTrust load_trust(const std::string& path, const RatingDataset& ratings) {
  require_file(path, "trust");
  auto in = open_input(path);
  try {
    return parse_trust(in, ratings);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

struct ScaleFlags {
  double min = 1.0;
  double max = 5.0;
  RatingScale scale() const {
    if (!(min < max)) throw ParseError("--scale-min must be below --scale-max");
    return {min, max};
  }
};

void add_scale(CLI::App* cmd, ScaleFlags& s) {
  cmd->add_option("--scale-min", s.min, "Lowest rating on the scale")->capture_default_str();
  cmd->add_option("--scale-max", s.max, "Highest rating on the scale")->capture_default_str();
}

struct StatsArgs {
  std::string ratings, trust, name = "dataset", format = "kv";
  ScaleFlags scale;
};

int cmd_stats(const StatsArgs& a) {
  const auto ds = load_ratings(a.ratings, a.scale.scale());
  const auto stats = dataset_stats(ds);
  if (a.format == "csv") {
    write_stats_csv(std::cout, a.name, stats);
  } else {
    write_stats_kv(std::cout, stats);
    std::cout << "density_percent=" << 100.0 * stats.density << '\n' << "duplicates=" << ds.duplicates() << '\n';
  }
  if (!a.trust.empty()) {
    const auto t = load_trust(a.trust, ds);
    std::cout << "trust_lines=" << t.lines << '\n'
              << "trust_edges=" << t.edges.size() << '\n'
              << "trust_density=" << t.edges.density() << '\n'
              << "trust_density_percent=" << 100.0 * t.edges.density() << '\n'
              << "trust_dropped_unknown=" << t.dropped_unknown << '\n'
              << "trust_self_loops=" << t.dropped_self_loops << '\n'
              << "trust_duplicates=" << t.duplicates << '\n';
  }
  return 0;
}

struct ExtractArgs {
  std::string ratings, out;
  double expected_degree = 10.0;
  std::size_t sample = 0;
  std::uint64_t seed = 1;
  unsigned jobs = default_jobs();
  ScaleFlags scale;
};

int cmd_extract(const ExtractArgs& a) {
  const auto ds = load_ratings(a.ratings, a.scale.scale());
  ExtractionParams p;
  p.expected_degree = a.expected_degree;
  p.sample_size = a.sample;
  p.seed = a.seed;
  p.jobs = a.jobs;
  const auto result = extract_implicit_trust(ds, p);
  if (a.out.empty()) {
    write_trust(std::cout, result.edges, ds);
    std::cerr << diagnostics_line(result) << '\n';
  } else {
    auto out = open_output(a.out);
    write_trust(out, result.edges, ds);
    std::cout << diagnostics_line(result) << '\n';
  }
  return 0;
}

struct RunArgs {
  std::string config;
  std::string ratings, trust, dataset, trust_source, out_dir, mode;
  std::vector<std::string> models;
  std::vector<double> sweep_grid;
  std::optional<std::size_t> factors, folds, sample;
  std::optional<int> iters;
  std::optional<double> lr, reg, reg_social, expected_degree, scale_min, scale_max;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
};

ExperimentConfig resolve_config(const RunArgs& a) {
  ExperimentConfig cfg;
  if (!a.config.empty()) {
    require_file(a.config, "config");
    auto in = open_input(a.config);
    try {
      cfg = parse_config(in);
    } catch (const ParseError& e) {
      throw ParseError(a.config + ": " + e.what());
    }
  }
  if (!a.ratings.empty()) cfg.ratings_path = a.ratings;
  if (!a.trust.empty()) cfg.trust_path = a.trust;
  if (!a.dataset.empty()) cfg.dataset_name = a.dataset;
  if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
  if (!a.mode.empty()) cfg.mode = parse_run_mode(a.mode);
  if (!a.trust_source.empty()) cfg.trust_source = parse_trust_kind(a.trust_source);
  if (!a.sweep_grid.empty()) cfg.sweep_grid = a.sweep_grid;
  if (a.scale_min) cfg.scale.min = *a.scale_min;
  if (a.scale_max) cfg.scale.max = *a.scale_max;
  if (a.folds) cfg.folds = *a.folds;
  if (a.seed) cfg.seed = *a.seed;
  if (a.jobs) cfg.jobs = *a.jobs;
  if (a.expected_degree) cfg.extraction.expected_degree = *a.expected_degree;
  if (a.sample) cfg.extraction.sample_size = *a.sample;
  for (const auto& m : a.models) cfg.models.push_back(parse_model_line(m));
  for (auto& m : cfg.models) {
    if (a.factors) m.hp.factors = *a.factors;
    if (a.iters) m.hp.max_iter = *a.iters;
    if (a.lr) m.hp.learn_rate = *a.lr;
    if (a.reg) m.hp.reg = *a.reg;
    if (a.reg_social) m.hp.reg_social = *a.reg_social;
    if (m.implicit_trust && cfg.trust_source == TrustKind::none) cfg.trust_source = TrustKind::hellinger;
  }
  if (cfg.dataset_name.empty()) cfg.dataset_name = fs::path(cfg.ratings_path).parent_path().filename().string();
  if (cfg.dataset_name.empty()) cfg.dataset_name = "dataset";
  cfg.extraction.seed = cfg.seed;
  cfg.extraction.jobs = cfg.jobs;
  cfg.validate();
  require_file(cfg.ratings_path, "ratings");
  if (!cfg.trust_path.empty()) require_file(cfg.trust_path, "trust");
  return cfg;
}

int cmd_run(const RunArgs& a) {
  const ExperimentConfig cfg = resolve_config(a);
  const auto ds = load_ratings(cfg.ratings_path, cfg.scale);
  std::optional<ParsedTrust> trust;
  if (!cfg.trust_path.empty()) trust = load_trust(cfg.trust_path, ds);

  const auto folds = kfold_split(ds, cfg.folds, cfg.seed);
  CvOptions opt{cfg.dataset_name, cfg.jobs, cfg.seed};
  const fs::path dir = cfg.out_dir;

  if (cfg.mode == RunMode::sweep) {
    int status = 0;
    for (const auto& spec : cfg.models) {
      if (!spec.needs_trust()) continue;
      ModelSpec s = spec;
      s.implicit_trust = true;
      const auto curve = threshold_sweep(ds, cfg.sweep_grid, s, folds, cfg.extraction, opt);
      auto out = open_output(dir / "sweep.csv");
      write_sweep_csv(out, curve);
      for (const auto& p : curve) {
        if (!p.ok()) {
          std::cerr << "sweep point " << p.expected_degree << ": " << p.error << '\n';
          status = kExitOther;
        }
      }
      write_sweep_csv(std::cout, curve);
      break;
    }
    return status;
  }

  if (cfg.mode == RunMode::compare) {
    std::vector<ModelSpec> specs;
    for (const auto& m : cfg.models)
      if (m.needs_trust()) specs.push_back(m);
    const auto rows = compare_trust_sources(ds, trust->edges, cfg.extraction, specs, folds, opt);
    std::vector<EvalReport> reports;
    for (const auto& r : rows) {
      reports.push_back(r.explicit_report);
      reports.push_back(r.implicit_report);
    }
    auto metrics = open_output(dir / "metrics.csv");
    write_fold_csv(metrics, reports);
    auto aggregate = open_output(dir / "aggregate.csv");
    write_aggregate_csv(aggregate, reports);
    auto table = open_output(dir / "comparison.csv");
    write_comparison_table(table, rows);
    write_comparison_table(std::cout, rows);
    return 0;
  }

  std::vector<EvalReport> reports;
  for (const auto& spec : cfg.models) {
    TrustSource src;
    if (spec.needs_trust()) {
      if (spec.implicit_trust || cfg.trust_source == TrustKind::hellinger) {
        src = TrustSource{TrustKind::hellinger, nullptr, cfg.extraction};
      } else {
        if (!trust) throw ParseError("model " + spec.label() + " needs --trust");
        src = TrustSource{TrustKind::explicit_file, &trust->edges, {}};
      }
    }
    reports.push_back(cross_validate(ds, spec, folds, src, opt));
    write_aggregate_csv(std::cout, std::span(reports).last(1), reports.size() == 1);
    std::cout.flush();
  }
  auto metrics = open_output(dir / "metrics.csv");
  write_fold_csv(metrics, reports);
  auto aggregate = open_output(dir / "aggregate.csv");
  write_aggregate_csv(aggregate, reports);
  return 0;
}

template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const DegenerateError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDegenerate;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Implicit trust extraction and trust-aware rating prediction"};
  app.require_subcommand(1);

  StatsArgs stats;
  auto* s = app.add_subcommand("stats", "Print dataset statistics (and trust density with --trust)");
  s->add_option("--ratings", stats.ratings, "Rating file: user item rating per line")->required();
  s->add_option("--trust", stats.trust, "Trust file: truster trustee [weight] per line");
  s->add_option("--name", stats.name, "Dataset name for CSV output")->capture_default_str();
  s->add_option("--format", stats.format, "Output format")->check(CLI::IsMember({"kv", "csv"}))->capture_default_str();
  add_scale(s, stats.scale);

  ExtractArgs extract;
  auto* e = app.add_subcommand("extract", "Extract an implicit trust graph from ratings");
  e->add_option("--ratings", extract.ratings, "Rating file")->required();
  e->add_option("--expected-degree", extract.expected_degree, "Target mean degree E[deg]")->required();
  e->add_option("--sample", extract.sample, "Sampled distance pairs (0: min(all pairs, 1e6))")->capture_default_str();
  e->add_option("--seed", extract.seed, "Sampling seed")->capture_default_str();
  e->add_option("--out", extract.out, "Edge file to write (default: stdout)");
  e->add_option("--jobs", extract.jobs, "Threads for the pairwise scan")->check(CLI::PositiveNumber)->capture_default_str();
  add_scale(e, extract.scale);

  RunArgs run;
  auto* r = app.add_subcommand("run", "Cross-validated experiment from a config file and/or flags");
  r->add_option("--config", run.config, "Experiment config (key = value lines)");
  r->add_option("--ratings", run.ratings, "Rating file");
  r->add_option("--trust", run.trust, "Explicit trust file");
  r->add_option("--dataset", run.dataset, "Dataset name used in CSV output");
  r->add_option("--model", run.models, "Model, optionally with options: \"BiasedMF factors=10, reg=0.1\"");
  r->add_option("--factors", run.factors, "Latent factors (all factor models)");
  r->add_option("--iters", run.iters, "SGD epochs (max.iter)");
  r->add_option("--lr", run.lr, "SGD learning rate");
  r->add_option("--reg", run.reg, "L2 regularization lambda");
  r->add_option("--reg-social", run.reg_social, "Trust regularization lambda_t");
  r->add_option("--folds", run.folds, "Cross-validation folds");
  r->add_option("--seed", run.seed, "Top-level seed");
  r->add_option("--trust-source", run.trust_source, "Trust input for trust models")
      ->check(CLI::IsMember({"none", "explicit", "hellinger"}));
  r->add_option("--expected-degree", run.expected_degree, "E[deg] for hellinger trust");
  r->add_option("--sample", run.sample, "Sampled distance pairs for hellinger trust");
  r->add_option("--mode", run.mode, "Experiment mode")->check(CLI::IsMember({"cv", "sweep", "compare"}));
  r->add_option("--sweep-grid", run.sweep_grid, "E[deg] values for sweep mode")->delimiter(',');
  r->add_option("--out-dir", run.out_dir, "Directory for CSV output");
  r->add_option("--jobs", run.jobs, "Parallel folds (default: hardware threads)")->check(CLI::PositiveNumber);
  r->add_option("--scale-min", run.scale_min, "Lowest rating on the scale");
  r->add_option("--scale-max", run.scale_max, "Highest rating on the scale");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitInput;
  }

  if (*s) return guarded([&] { return cmd_stats(stats); });
  if (*e) return guarded([&] { return cmd_extract(extract); });
  if (*r) return guarded([&] { return cmd_run(run); });
  return kExitOther;
}
