#pragma once

// Model registry: canonical names, default configurations and training.

#include <algorithm>
#include <array>
#include <cctype>
#include <memory>
#include <string>
#include <string_view>

#include "helltrust/baselines.hpp"
#include "helltrust/dataset.hpp"
#include "helltrust/error.hpp"
#include "helltrust/factor_model.hpp"
#include "helltrust/knn.hpp"
#include "helltrust/predictor.hpp"

namespace helltrust {

enum class ModelKind { globalavg, useravg, itemavg, slopeone, userknn, itemknn, regsvd, biasedmf, svdpp, trustsvd };

struct ModelSpec {
  ModelKind kind = ModelKind::globalavg;
  HyperParams hp;
  std::size_t neighbors = 50;
  std::size_t shrinkage = 30;
  // trustsvd fed the Hellinger-extracted graph rather than an explicit file
  bool implicit_trust = false;
  // overrides the generated label when nonempty
  std::string label_override;

  bool is_factor_model() const noexcept {
    return kind == ModelKind::regsvd || kind == ModelKind::biasedmf || kind == ModelKind::svdpp ||
           kind == ModelKind::trustsvd;
  }
  bool needs_trust() const noexcept { return kind == ModelKind::trustsvd; }

  std::string base_name() const {
    switch (kind) {
      case ModelKind::globalavg: return "GlobalAvg";
      case ModelKind::useravg: return "UserAvg";
      case ModelKind::itemavg: return "ItemAvg";
      case ModelKind::slopeone: return "SlopeOne";
      case ModelKind::userknn: return "UserKNN";
      case ModelKind::itemknn: return "ItemKNN";
      case ModelKind::regsvd: return "RegSVD";
      case ModelKind::biasedmf: return "BiasedMF";
      case ModelKind::svdpp: return "SVD++";
      case ModelKind::trustsvd: return implicit_trust ? "Hell-TrustSVD" : "TrustSVD";
    }
    return "Model";
  }

  /// Display label, e.g. "SVD++(d=10)"; factor models carry their dimension
  /// so the two Table-2-style rows of one model stay distinguishable.
  std::string label() const {
    if (!label_override.empty()) return label_override;
    if (is_factor_model()) return base_name() + "(d=" + std::to_string(hp.factors) + ")";
    return base_name();
  }
};

inline constexpr std::array<std::string_view, 11> kModelNames = {
    "globalavg", "useravg", "itemavg", "slopeone", "userknn", "itemknn",
    "regsvd",    "biasedmf", "svdpp",  "trustsvd", "helltrustsvd"};

/// Lower-cases and strips '-', '_' and '+' so "SVD++", "Hell-TrustSVD" and
/// "hell_trustsvd" all resolve.
inline std::string canonical_model_name(std::string_view raw) {
  std::string out;
  for (char c : raw) {
    if (c == '-' || c == '_') continue;
    if (c == '+') {
      if (out.empty() || out.back() != 'p') out += "pp";
      continue;
    }
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

/// Default configuration per model, taken from the MovieLens-100K table
/// (factors, max.iter, learn.rate, reg). TrustSVD uses lambda_t = 0.5.
inline ModelSpec default_model_spec(std::string_view name) {
  const std::string key = canonical_model_name(name);
  ModelSpec s;
  auto factor = [&](ModelKind kind, std::size_t factors, int iters, double lr) {
    s.kind = kind;
    s.hp.factors = factors;
    s.hp.max_iter = iters;
    s.hp.learn_rate = lr;
    s.hp.reg = 0.1;
    s.hp.reg_social = 0.5;
  };
  if (key == "globalavg") s.kind = ModelKind::globalavg;
  else if (key == "useravg") s.kind = ModelKind::useravg;
  else if (key == "itemavg") s.kind = ModelKind::itemavg;
  else if (key == "slopeone") s.kind = ModelKind::slopeone;
  else if (key == "userknn") s.kind = ModelKind::userknn;
  else if (key == "itemknn") s.kind = ModelKind::itemknn;
  else if (key == "regsvd") factor(ModelKind::regsvd, 10, 200, 0.01);
  else if (key == "biasedmf") factor(ModelKind::biasedmf, 10, 200, 0.01);
  else if (key == "svdpp") factor(ModelKind::svdpp, 10, 100, 0.01);
  else if (key == "trustsvd") factor(ModelKind::trustsvd, 5, 200, 0.001);
  else if (key == "helltrustsvd") {
    factor(ModelKind::trustsvd, 5, 200, 0.001);
    s.implicit_trust = true;
  } else {
    throw ParseError("unknown model '" + std::string(name) + "'");
  }
  return s;
}

inline FactorVariant factor_variant(ModelKind kind) {
  switch (kind) {
    case ModelKind::regsvd: return FactorVariant::regsvd;
    case ModelKind::biasedmf: return FactorVariant::biasedmf;
    case ModelKind::svdpp: return FactorVariant::svdpp;
    case ModelKind::trustsvd: return FactorVariant::trustsvd;
    default: throw DomainError("not a latent-factor model");
  }
}

/// Trains `spec` on `train`. `trust` is required for trustsvd and ignored
/// otherwise; `seed` replaces the spec's seed for the factor models.
inline std::unique_ptr<Predictor> train_model(const ModelSpec& spec, const RatingDataset& train,
                                              const TrustEdgeList* trust, std::uint64_t seed) {
  switch (spec.kind) {
    case ModelKind::globalavg: return std::make_unique<MeanModel>(train, MeanKind::global);
    case ModelKind::useravg: return std::make_unique<MeanModel>(train, MeanKind::user);
    case ModelKind::itemavg: return std::make_unique<MeanModel>(train, MeanKind::item);
    case ModelKind::slopeone: return std::make_unique<SlopeOneModel>(train);
    case ModelKind::userknn:
      return std::make_unique<KnnModel>(train, KnnMode::user, spec.neighbors, spec.shrinkage);
    case ModelKind::itemknn:
      return std::make_unique<KnnModel>(train, KnnMode::item, spec.neighbors, spec.shrinkage);
    default: break;
  }
  HyperParams hp = spec.hp;
  hp.seed = seed;
  if (spec.kind == ModelKind::trustsvd) {
    if (!trust) throw DomainError(spec.label() + " needs a trust edge list");
    return std::make_unique<FactorModel>(train_trust_svd(train, *trust, hp));
  }
  return std::make_unique<FactorModel>(train_latent_factor(train, hp, factor_variant(spec.kind)));
}

}  // namespace helltrust
