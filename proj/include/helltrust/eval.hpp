#pragma once

// Cross-validation, MAE/RMSE, threshold sweeps and paired explicit vs
// extracted trust comparisons.

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "helltrust/dataset.hpp"
#include "helltrust/error.hpp"
#include "helltrust/models.hpp"
#include "helltrust/predictor.hpp"
#include "helltrust/random.hpp"
#include "helltrust/trust_extract.hpp"

namespace helltrust {

struct Metrics {
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t n = 0;
};

inline Metrics evaluate(const Predictor& model, std::span<const RatingRecord> test) {
  if (test.empty()) throw DomainError("evaluate: empty test set");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (const auto& r : test) {
    const double e = model.predict(r.user, r.item) - r.rating;
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  const double n = static_cast<double>(test.size());
  return {abs_sum / n, std::sqrt(sq_sum / n), test.size()};
}

/// Arithmetic mean and standard error (sample std / sqrt(k)).
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(std::span<const double> values) {
  if (values.empty()) throw DomainError("mean_se: no values");
  const double k = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= k;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (k - 1.0)) / std::sqrt(k)};
}

enum class TrustKind { none, explicit_file, hellinger };

struct TrustSource {
  TrustKind kind = TrustKind::none;
  const TrustEdgeList* explicit_edges = nullptr;  // for explicit_file
  ExtractionParams extraction;                    // for hellinger

  std::string name() const {
    switch (kind) {
      case TrustKind::none: return "none";
      case TrustKind::explicit_file: return "explicit";
      case TrustKind::hellinger: {
        std::ostringstream out;
        out << "hellinger(" << extraction.expected_degree << ")";
        return out.str();
      }
    }
    return "unknown";
  }
};

struct FoldTrust {
  TrustEdgeList edges;
  std::optional<double> threshold;
};

/// Supplies the trust graph for one fold, given only that fold's training
/// ratings.
using TrustProvider = std::function<FoldTrust(const RatingDataset& train, std::size_t fold)>;

/// Explicit edges are used as-is; extraction reruns per fold on the training
/// ratings with a per-fold sampling seed.
inline TrustProvider make_trust_provider(const TrustSource& source) {
  switch (source.kind) {
    case TrustKind::none:
      return [](const RatingDataset& train, std::size_t) { return FoldTrust{TrustEdgeList(train.num_users()), {}}; };
    case TrustKind::explicit_file: {
      if (!source.explicit_edges) throw DomainError("explicit trust source without an edge list");
      const TrustEdgeList* edges = source.explicit_edges;
      return [edges](const RatingDataset&, std::size_t) { return FoldTrust{*edges, {}}; };
    }
    case TrustKind::hellinger: {
      const ExtractionParams base = source.extraction;
      return [base](const RatingDataset& train, std::size_t fold) {
        ExtractionParams p = base;
        p.seed = derive_seed(base.seed, "fold-extract", fold);
        auto r = extract_implicit_trust(train, p);
        return FoldTrust{std::move(r.edges), r.threshold.threshold};
      };
    }
  }
  throw DomainError("unknown trust source");
}

struct FoldResult {
  std::size_t fold = 0;
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t n_test = 0;
  double seconds = 0.0;
  std::optional<double> threshold;
  std::size_t trust_edges = 0;
};

struct EvalReport {
  std::string model;
  std::string dataset;
  std::string trust_source;
  std::vector<FoldResult> folds;
  MeanSe mae;
  MeanSe rmse;

  std::optional<double> mean_threshold() const {
    double s = 0.0;
    for (const auto& f : folds) {
      if (!f.threshold) return std::nullopt;
      s += *f.threshold;
    }
    if (folds.empty()) return std::nullopt;
    return s / static_cast<double>(folds.size());
  }
};

struct CvOptions {
  std::string dataset_name = "dataset";
  unsigned jobs = 1;
  std::uint64_t seed = 1;  // model seeds are derived per fold from this
};

namespace detail {

// Rethrows the active library exception with a fold prefix, keeping its type.
[[noreturn]] inline void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const DivergenceError& e) {
    throw DivergenceError(e.epoch(), context);
  } catch (const DegenerateError& e) {
    throw DegenerateError(context + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(context + ": " + e.what());
  } catch (const DomainError& e) {
    throw DomainError(context + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(context + ": " + e.what());
  }
}

/// Runs job(i) for i in [0, n) on up to `jobs` threads; rethrows the error of
/// the lowest failing index.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& job) {
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t i) {
    try {
      job(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::min<std::size_t>(std::max(1u, jobs), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) run(i);
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

/// k-fold evaluation of one model over a fixed fold assignment. The trust
/// provider only ever sees the training part of each fold.
inline EvalReport cross_validate(const RatingDataset& ds, const ModelSpec& spec, const FoldAssignment& folds,
                                 const TrustProvider& trust, const std::string& trust_name, const CvOptions& opt) {
  if (folds.assignment().size() != ds.size()) throw DomainError("fold assignment does not match the dataset");
  EvalReport report;
  report.model = spec.label();
  report.dataset = opt.dataset_name;
  report.trust_source = spec.needs_trust() ? trust_name : "none";
  report.folds.resize(folds.k());

  detail::parallel_for(folds.k(), opt.jobs, [&](std::size_t f) {
    try {
      const auto start = std::chrono::steady_clock::now();
      const auto train_pos = folds.train_positions(f);
      const auto test_pos = folds.test_positions(f);
      const RatingDataset train = ds.subset(train_pos);
      std::vector<RatingRecord> test;
      test.reserve(test_pos.size());
      for (auto p : test_pos) test.push_back(ds.records()[p]);

      FoldResult& out = report.folds[f];
      out.fold = f;
      std::optional<FoldTrust> ft;
      if (spec.needs_trust()) {
        ft = trust(train, f);
        out.threshold = ft->threshold;
        out.trust_edges = ft->edges.size();
      }
      const auto model = train_model(spec, train, ft ? &ft->edges : nullptr, derive_seed(opt.seed, "fold-model", f));
      const Metrics m = evaluate(*model, test);
      if (m.mae > m.rmse * (1.0 + 1e-12)) throw Error("MAE exceeds RMSE");
      out.mae = m.mae;
      out.rmse = m.rmse;
      out.n_test = m.n;
      out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    } catch (...) {
      detail::rethrow_with_context(report.model + " fold " + std::to_string(f));
    }
  });

  std::vector<double> maes, rmses;
  for (const auto& f : report.folds) {
    maes.push_back(f.mae);
    rmses.push_back(f.rmse);
  }
  report.mae = mean_se(maes);
  report.rmse = mean_se(rmses);
  return report;
}

inline EvalReport cross_validate(const RatingDataset& ds, const ModelSpec& spec, const FoldAssignment& folds,
                                 const TrustSource& source, const CvOptions& opt) {
  return cross_validate(ds, spec, folds, make_trust_provider(source), source.name(), opt);
}

inline EvalReport cross_validate(const RatingDataset& ds, const ModelSpec& spec, std::size_t k, std::uint64_t seed,
                                 const TrustSource& source, CvOptions opt = {}) {
  opt.seed = seed;
  return cross_validate(ds, spec, kfold_split(ds, k, seed), source, opt);
}

inline const std::vector<double>& default_sweep_grid() {
  static const std::vector<double> grid = {0.1, 0.5, 1, 2, 5, 10, 20, 50, 100, 200, 500};
  return grid;
}

/// Model used by the threshold sweep: Hell-TrustSVD with factors=5,
/// max.iter=50, learn.rate=0.005, reg=0.5.
inline ModelSpec sweep_model_spec() {
  ModelSpec s = default_model_spec("helltrustsvd");
  s.hp.factors = 5;
  s.hp.max_iter = 50;
  s.hp.learn_rate = 0.005;
  s.hp.reg = 0.5;
  return s;
}

struct SweepPoint {
  double expected_degree = 0.0;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  double mae = std::numeric_limits<double>::quiet_NaN();
  double rmse = std::numeric_limits<double>::quiet_NaN();
  std::optional<EvalReport> report;
  std::string error;  // empty on success

  bool ok() const noexcept { return error.empty(); }
};

/// One cross-validation per expected degree over a shared fold assignment.
/// A failing point records its error and the sweep moves on.
inline std::vector<SweepPoint> threshold_sweep(const RatingDataset& ds, std::span<const double> expected_degrees,
                                               const ModelSpec& spec, const FoldAssignment& folds,
                                               const ExtractionParams& extraction, const CvOptions& opt) {
  if (!spec.needs_trust()) throw DomainError("threshold_sweep: model does not use trust");
  std::vector<SweepPoint> curve;
  for (double e : expected_degrees) {
    SweepPoint pt;
    pt.expected_degree = e;
    try {
      if (!(e > 0.0) || !(e < static_cast<double>(ds.num_items())))
        throw DegenerateError("expected degree outside (0, M)");
      TrustSource src{TrustKind::hellinger, nullptr, extraction};
      src.extraction.expected_degree = e;
      auto report = cross_validate(ds, spec, folds, src, opt);
      pt.threshold = report.mean_threshold().value_or(pt.threshold);
      pt.mae = report.mae.mean;
      pt.rmse = report.rmse.mean;
      pt.report = std::move(report);
    } catch (const std::exception& ex) {
      pt.error = ex.what();
    }
    curve.push_back(std::move(pt));
  }
  return curve;
}

struct TrustComparison {
  EvalReport explicit_report;
  EvalReport implicit_report;
};

/// Per model spec: explicit trust vs Hellinger-extracted trust on the same
/// folds and model seeds.
inline std::vector<TrustComparison> compare_trust_sources(const RatingDataset& ds, const TrustEdgeList& explicit_edges,
                                                          const ExtractionParams& extraction,
                                                          std::span<const ModelSpec> specs,
                                                          const FoldAssignment& folds, const CvOptions& opt) {
  std::vector<TrustComparison> out;
  for (const auto& spec : specs) {
    ModelSpec s = spec;
    s.implicit_trust = false;
    TrustComparison c;
    c.explicit_report = cross_validate(ds, s, folds, TrustSource{TrustKind::explicit_file, &explicit_edges, {}}, opt);
    s.implicit_trust = true;
    c.implicit_report = cross_validate(ds, s, folds, TrustSource{TrustKind::hellinger, nullptr, extraction}, opt);
    out.push_back(std::move(c));
  }
  return out;
}

namespace detail {

inline std::string fixed(double x, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << x;
  return out.str();
}

}  // namespace detail

inline void write_fold_csv(std::ostream& out, std::span<const EvalReport> reports, bool header = true) {
  if (header) out << "model,dataset,trust_source,fold,mae,rmse,n_test,seconds\n";
  for (const auto& r : reports)
    for (const auto& f : r.folds)
      out << r.model << ',' << r.dataset << ',' << r.trust_source << ',' << f.fold << ',' << detail::fixed(f.mae, 6)
          << ',' << detail::fixed(f.rmse, 6) << ',' << f.n_test << ',' << detail::fixed(f.seconds, 3) << '\n';
}

inline void write_aggregate_csv(std::ostream& out, std::span<const EvalReport> reports, bool header = true) {
  if (header) out << "model,dataset,trust_source,mae_mean,mae_se,rmse_mean,rmse_se\n";
  for (const auto& r : reports)
    out << r.model << ',' << r.dataset << ',' << r.trust_source << ',' << detail::fixed(r.mae.mean, 6) << ','
        << detail::fixed(r.mae.se, 6) << ',' << detail::fixed(r.rmse.mean, 6) << ',' << detail::fixed(r.rmse.se, 6)
        << '\n';
}

inline void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> curve) {
  out << "expected_degree,threshold,mae_mean,rmse_mean\n";
  for (const auto& p : curve) {
    std::ostringstream e;
    e << p.expected_degree;
    out << e.str() << ',' << detail::fixed(p.threshold, 6) << ',' << detail::fixed(p.mae, 6) << ','
        << detail::fixed(p.rmse, 6) << '\n';
  }
}

/// Side-by-side table, implicit result in parentheses: "0.623(0.625)".
inline void write_comparison_table(std::ostream& out, std::span<const TrustComparison> rows) {
  out << "model,mae,rmse\n";
  for (const auto& c : rows) {
    std::string name = c.explicit_report.model;
    out << name << ',' << detail::fixed(c.explicit_report.mae.mean, 3) << '('
        << detail::fixed(c.implicit_report.mae.mean, 3) << ")," << detail::fixed(c.explicit_report.rmse.mean, 3)
        << '(' << detail::fixed(c.implicit_report.rmse.mean, 3) << ")\n";
  }
}

}  // namespace helltrust
