#pragma once

// Flat key = value experiment config. Model lines reuse the configuration
// vocabulary of the result tables:
//
//   ratings = data/ml-100k/u.data
//   scale = 1 5
//   model = BiasedMF factors=10, max.iter=200, learn.rate=0.01, reg=0.1
//   model = UserKNN similarity=PCC, shrinkage=30, neighbors=50
//
// '#' starts a comment. Every key is validated before anything runs.

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "helltrust/dataset.hpp"
#include "helltrust/error.hpp"
#include "helltrust/eval.hpp"
#include "helltrust/models.hpp"

namespace helltrust {

enum class RunMode { cv, sweep, compare };

inline RunMode parse_run_mode(std::string_view s) {
  if (s == "cv") return RunMode::cv;
  if (s == "sweep") return RunMode::sweep;
  if (s == "compare") return RunMode::compare;
  throw ParseError("unknown mode '" + std::string(s) + "' (expected cv, sweep or compare)");
}

inline TrustKind parse_trust_kind(std::string_view s) {
  if (s == "none") return TrustKind::none;
  if (s == "explicit") return TrustKind::explicit_file;
  if (s == "hellinger") return TrustKind::hellinger;
  throw ParseError("unknown trust source '" + std::string(s) + "' (expected none, explicit or hellinger)");
}

struct ExperimentConfig {
  std::string ratings_path;
  std::string trust_path;
  std::string dataset_name;
  RatingScale scale{1.0, 5.0};
  std::vector<ModelSpec> models;
  TrustKind trust_source = TrustKind::none;
  ExtractionParams extraction;
  std::size_t folds = 5;
  std::uint64_t seed = 1;
  unsigned jobs = default_jobs();
  std::string out_dir = "results";
  RunMode mode = RunMode::cv;
  std::vector<double> sweep_grid = default_sweep_grid();

  /// Checks everything that can be checked without touching the data.
  void validate() const {
    if (ratings_path.empty()) throw ParseError("config: ratings path is required");
    if (!(scale.min < scale.max)) throw ParseError("config: scale min must be below max");
    if (folds < 2) throw ParseError("config: folds must be >= 2");
    if (jobs < 1) throw ParseError("config: jobs must be >= 1");
    if (models.empty()) throw ParseError("config: no model given");
    if (!(extraction.expected_degree > 0.0)) throw ParseError("config: expected.degree must be > 0");
    for (const auto& m : models) {
      m.hp.validate();
      if (m.neighbors == 0) throw ParseError("config: neighbors must be >= 1");
    }
    const bool any_trust = std::any_of(models.begin(), models.end(), [](const ModelSpec& m) { return m.needs_trust(); });
    if (any_trust && trust_source == TrustKind::explicit_file && trust_path.empty())
      throw ParseError("config: trust.source=explicit needs a trust file");
    if (any_trust && trust_source == TrustKind::none && mode != RunMode::compare)
      throw ParseError("config: trust models need trust.source explicit or hellinger");
    if (mode == RunMode::compare && trust_path.empty()) throw ParseError("config: compare mode needs a trust file");
    if ((mode == RunMode::sweep || mode == RunMode::compare) && !any_trust)
      throw ParseError("config: sweep and compare modes need a trust model");
    if (mode == RunMode::sweep && sweep_grid.empty()) throw ParseError("config: empty sweep grid");
    for (double e : sweep_grid)
      if (!(e > 0.0)) throw ParseError("config: sweep grid values must be > 0");
  }
};

namespace detail {

inline double config_real(std::string_view key, std::string_view value) {
  auto v = parse_real(trim(value));
  if (!v) throw ParseError("config: '" + std::string(key) + "' expects a number, got '" + std::string(value) + "'");
  return *v;
}

inline std::uint64_t config_uint(std::string_view key, std::string_view value) {
  value = trim(value);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw ParseError("config: '" + std::string(key) + "' expects a non-negative integer, got '" + std::string(value) +
                     "'");
  return v;
}

}  // namespace detail

/// Applies one "key=value" model option. Table vocabulary: factors,
/// max.iter, learn.rate, reg, similarity, shrinkage, neighbors.
inline void apply_model_option(ModelSpec& spec, std::string_view key, std::string_view value) {
  value = detail::trim(value);
  if (key == "factors" || key == "num.factors") spec.hp.factors = detail::config_uint(key, value);
  else if (key == "max.iter" || key == "iters") spec.hp.max_iter = static_cast<int>(detail::config_uint(key, value));
  else if (key == "learn.rate" || key == "lr") spec.hp.learn_rate = detail::config_real(key, value);
  else if (key == "reg" || key == "lambda") spec.hp.reg = detail::config_real(key, value);
  else if (key == "reg.social" || key == "lambda.t") spec.hp.reg_social = detail::config_real(key, value);
  else if (key == "init.std") spec.hp.init_std = detail::config_real(key, value);
  else if (key == "reg.weighting") spec.hp.weighting = parse_reg_weighting(value);
  else if (key == "shrinkage") spec.shrinkage = detail::config_uint(key, value);
  else if (key == "neighbors") spec.neighbors = detail::config_uint(key, value);
  else if (key == "label") spec.label_override = std::string(value);
  else if (key == "similarity") {
    if (value != "PCC" && value != "pcc") throw ParseError("config: only similarity=PCC is supported");
  } else {
    throw ParseError("config: unknown model option '" + std::string(key) + "'");
  }
}

/// "BiasedMF factors=10, max.iter=200" -> spec with table defaults overridden.
inline ModelSpec parse_model_line(std::string_view line) {
  const auto fields = detail::split_fields(line);
  if (fields.empty()) throw ParseError("config: empty model line");
  ModelSpec spec = default_model_spec(fields[0]);
  for (std::size_t i = 1; i < fields.size(); ++i) {
    const auto eq = fields[i].find('=');
    if (eq == std::string_view::npos || eq == 0)
      throw ParseError("config: model option '" + std::string(fields[i]) + "' is not key=value");
    apply_model_option(spec, fields[i].substr(0, eq), fields[i].substr(eq + 1));
  }
  return spec;
}

inline void apply_config_key(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  value = detail::trim(value);
  if (key == "ratings") cfg.ratings_path = std::string(value);
  else if (key == "trust") cfg.trust_path = std::string(value);
  else if (key == "dataset") cfg.dataset_name = std::string(value);
  else if (key == "scale") {
    const auto parts = detail::split_fields(value);
    if (parts.size() != 2) throw ParseError("config: scale expects 'min max'");
    cfg.scale = {detail::config_real(key, parts[0]), detail::config_real(key, parts[1])};
  } else if (key == "scale.min") cfg.scale.min = detail::config_real(key, value);
  else if (key == "scale.max") cfg.scale.max = detail::config_real(key, value);
  else if (key == "model") cfg.models.push_back(parse_model_line(value));
  else if (key == "trust.source") cfg.trust_source = parse_trust_kind(value);
  else if (key == "expected.degree") cfg.extraction.expected_degree = detail::config_real(key, value);
  else if (key == "sample") cfg.extraction.sample_size = detail::config_uint(key, value);
  else if (key == "folds") cfg.folds = detail::config_uint(key, value);
  else if (key == "seed") cfg.seed = detail::config_uint(key, value);
  else if (key == "jobs") cfg.jobs = static_cast<unsigned>(detail::config_uint(key, value));
  else if (key == "out.dir") cfg.out_dir = std::string(value);
  else if (key == "mode") cfg.mode = parse_run_mode(value);
  else if (key == "sweep.grid") {
    cfg.sweep_grid.clear();
    for (auto v : detail::split_fields(value)) cfg.sweep_grid.push_back(detail::config_real(key, v));
  } else {
    throw ParseError("config: unknown key '" + std::string(key) + "'");
  }
}

/// Parses a config stream. Errors carry the line number. The result is not
/// validated, so flags can still override it.
inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = detail::trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", lineno);
    try {
      apply_config_key(cfg, detail::trim(s.substr(0, eq)), s.substr(eq + 1));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    } catch (const DomainError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return cfg;
}

}  // namespace helltrust
