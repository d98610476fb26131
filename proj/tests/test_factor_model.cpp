#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <vector>

#include "helltrust/factor_model.hpp"
#include "helltrust/random.hpp"

using namespace helltrust;

namespace {

RatingDataset random_dataset(std::uint64_t seed, std::size_t users, std::size_t items, std::size_t n) {
  Rng rng(seed);
  std::vector<RatingRecord> recs;
  for (std::size_t i = 0; i < n; ++i)
    recs.push_back({static_cast<UserIndex>(rng.below(users)), static_cast<ItemIndex>(rng.below(items)),
                    static_cast<double>(1 + rng.below(5))});
  return RatingDataset::from_records(recs, {1, 5}, users, items);
}

TrustEdgeList random_trust(std::uint64_t seed, std::size_t users, std::size_t count) {
  Rng rng(seed);
  std::set<std::pair<UserIndex, UserIndex>> seen;
  std::vector<TrustEdge> edges;
  while (edges.size() < count) {
    const auto a = static_cast<UserIndex>(rng.below(users)), b = static_cast<UserIndex>(rng.below(users));
    if (a == b || !seen.insert({a, b}).second) continue;
    edges.push_back({a, b, 0.5 + 0.5 * rng.uniform()});
  }
  return TrustEdgeList::build(users, edges);
}

void randomize(std::vector<double>& v, Rng& rng) {
  for (auto& x : v) x = 0.5 * rng.normal();
}

// Central differences over one parameter class, compared by relative norm.
double fd_relative_error(const FactorTrainer& trainer, FactorModel& model, std::vector<double>& param,
                         const std::vector<double>& analytic) {
  const double eps = 1e-5;
  double diff = 0.0, norm_a = 0.0, norm_n = 0.0;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double saved = param[i];
    param[i] = saved + eps;
    const double up = trainer.objective(model);
    param[i] = saved - eps;
    const double down = trainer.objective(model);
    param[i] = saved;
    const double numeric = (up - down) / (2 * eps);
    diff += (numeric - analytic[i]) * (numeric - analytic[i]);
    norm_a += analytic[i] * analytic[i];
    norm_n += numeric * numeric;
  }
  const double scale = std::max({std::sqrt(norm_a), std::sqrt(norm_n), 1e-12});
  return std::sqrt(diff) / scale;
}

HyperParams small_hp() {
  HyperParams hp;
  hp.factors = 3;
  hp.max_iter = 10;
  hp.learn_rate = 0.01;
  hp.reg = 0.2;
  hp.reg_social = 0.7;
  hp.seed = 3;
  return hp;
}

}  // namespace

TEST(FactorGradient, MatchesFiniteDifferences) {
  // 5 rated users plus one user known only through trust edges
  auto ds = random_dataset(21, 5, 5, 14);
  ds = RatingDataset::from_records({ds.records().begin(), ds.records().end()}, {1, 5}, 6, 5);
  auto trust = random_trust(22, 6, 10);
  for (auto variant : {FactorVariant::svdpp, FactorVariant::trustsvd}) {
    for (auto w : {RegWeighting::popularity, RegWeighting::uniform}) {
      auto hp = small_hp();
      hp.weighting = w;
      FactorTrainer trainer(ds, trust, variant, hp);
      auto model = trainer.initial_model();
      auto& p = model.mutable_params();
      Rng rng(23);
      randomize(p.user_bias, rng);
      randomize(p.item_bias, rng);
      randomize(p.P, rng);
      randomize(p.Q, rng);
      randomize(p.Y, rng);
      randomize(p.W, rng);
      model.refresh();
      const auto g = trainer.gradient(model);
      const std::string tag = to_string(variant) + "/" + to_string(w);
      EXPECT_LT(fd_relative_error(trainer, model, p.user_bias, g.user_bias), 1e-4) << tag << " b_u";
      EXPECT_LT(fd_relative_error(trainer, model, p.item_bias, g.item_bias), 1e-4) << tag << " b_j";
      EXPECT_LT(fd_relative_error(trainer, model, p.P, g.P), 1e-4) << tag << " P";
      EXPECT_LT(fd_relative_error(trainer, model, p.Q, g.Q), 1e-4) << tag << " Q";
      EXPECT_LT(fd_relative_error(trainer, model, p.Y, g.Y), 1e-4) << tag << " Y";
      if (variant == FactorVariant::trustsvd) {
        EXPECT_LT(fd_relative_error(trainer, model, p.W, g.W), 1e-4) << tag << " W";
      } else {
        EXPECT_TRUE(g.W.empty());
      }
    }
  }
}

TEST(FactorSgd, SingleRatingEpochIsOneGradientStep) {
  // With one rating every set has size 1, so the per-visit updates are the
  // full-batch gradient evaluated at the start of the epoch.
  auto ds = RatingDataset::from_records({{0, 0, 4.5}}, {1, 5});
  auto hp = small_hp();
  hp.weighting = RegWeighting::popularity;
  FactorTrainer trainer(ds, TrustEdgeList(1), FactorVariant::svdpp, hp);
  auto model = trainer.initial_model();
  model.mutable_params().user_bias = {0.3};
  model.mutable_params().item_bias = {-0.2};
  const auto before = model.params();
  const auto g = trainer.gradient(model);
  const std::vector<std::size_t> order = {0};
  trainer.run_epoch(model, order);
  const auto& after = model.params();
  auto check = [&](const std::vector<double>& b, const std::vector<double>& grad, const std::vector<double>& a) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i] - hp.learn_rate * grad[i], 1e-15);
  };
  check(before.user_bias, g.user_bias, after.user_bias);
  check(before.item_bias, g.item_bias, after.item_bias);
  check(before.P, g.P, after.P);
  check(before.Q, g.Q, after.Q);
  check(before.Y, g.Y, after.Y);
}

TEST(FactorSgd, FirstEpochLowersObjective) {
  auto ds = random_dataset(31, 20, 15, 120);
  auto trust = random_trust(32, 20, 40);
  for (auto variant : {FactorVariant::regsvd, FactorVariant::biasedmf, FactorVariant::svdpp, FactorVariant::trustsvd}) {
    auto hp = small_hp();
    hp.learn_rate = 1e-3;
    FactorTrainer trainer(ds, trust, variant, hp);
    auto model = trainer.initial_model();
    const double start = trainer.objective(model);
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    trainer.run_epoch(model, order);
    EXPECT_LT(trainer.objective(model), start) << to_string(variant);
  }
}

TEST(FactorSgd, DeterministicUnderSeed) {
  auto ds = random_dataset(41, 25, 20, 200);
  auto trust = random_trust(42, 25, 50);
  auto hp = small_hp();
  auto a = train_trust_svd(ds, trust, hp);
  auto b = train_trust_svd(ds, trust, hp);
  EXPECT_EQ(a.params(), b.params());
  hp.seed = 4;
  auto c = train_trust_svd(ds, trust, hp);
  EXPECT_NE(a.params(), c.params());
}

TEST(FactorSgd, TrustSvdWithoutTrustReducesToSvdpp) {
  auto ds = random_dataset(51, 30, 20, 250);
  for (auto w : {RegWeighting::popularity, RegWeighting::uniform}) {
    auto hp = small_hp();
    hp.reg_social = 0.0;
    hp.weighting = w;
    std::vector<FactorParams> svdpp, trustsvd;
    train_latent_factor(ds, hp, FactorVariant::svdpp, [&](int, const FactorModel& m) { svdpp.push_back(m.params()); });
    train_trust_svd(ds, TrustEdgeList(ds.num_users()), hp,
                    [&](int, const FactorModel& m) { trustsvd.push_back(m.params()); });
    ASSERT_EQ(svdpp.size(), static_cast<std::size_t>(hp.max_iter));
    ASSERT_EQ(trustsvd.size(), svdpp.size());
    for (std::size_t e = 0; e < svdpp.size(); ++e) {
      auto t = trustsvd[e];
      t.W.clear();
      EXPECT_EQ(t, svdpp[e]) << "epoch " << e + 1 << " " << to_string(w);
    }
  }
}

TEST(FactorModel, ZeroIterationsPredictsNearMean) {
  auto ds = random_dataset(61, 20, 20, 150);
  HyperParams hp;
  hp.max_iter = 0;
  auto m = train_latent_factor(ds, hp, FactorVariant::biasedmf);
  const double bound = 10 * hp.init_std * hp.init_std * hp.factors;
  for (const auto& r : ds.records()) EXPECT_LT(std::abs(m.predict(r.user, r.item) - ds.mean_rating()), bound);
}

TEST(FactorModel, SingleRatingConverges) {
  auto ds = RatingDataset::from_records({{0, 0, 4}}, {1, 5});
  HyperParams hp;
  hp.max_iter = 200;
  for (auto v : {FactorVariant::biasedmf, FactorVariant::svdpp})
    EXPECT_NEAR(train_latent_factor(ds, hp, v).predict(0, 0), 4.0, 0.01);
}

TEST(FactorModel, TwoByTwoMatchesFullBatchOracle) {
  auto ds = RatingDataset::from_records({{0, 0, 5}, {0, 1, 3}, {1, 0, 4}, {1, 1, 2}}, {1, 5});
  HyperParams hp;
  hp.factors = 2;
  hp.max_iter = 3000;
  hp.learn_rate = 0.01;
  hp.reg = 0.01;
  auto m = train_latent_factor(ds, hp, FactorVariant::biasedmf);

  // Oracle: full-batch gradient descent on the per-rating penalized loss,
  // started from the same initial parameters.
  FactorTrainer trainer(ds, TrustEdgeList(2), FactorVariant::biasedmf, hp);
  auto p = trainer.initial_model().params();
  const std::size_t L = hp.factors;
  for (int it = 0; it < 20000; ++it) {
    FactorParams g = p;
    for (auto* v : {&g.user_bias, &g.item_bias, &g.P, &g.Q}) std::fill(v->begin(), v->end(), 0.0);
    for (const auto& r : ds.records()) {
      const double* pu = &p.P[r.user * L];
      const double* qj = &p.Q[r.item * L];
      double pred = p.global_mean + p.user_bias[r.user] + p.item_bias[r.item];
      for (std::size_t f = 0; f < L; ++f) pred += pu[f] * qj[f];
      const double e = pred - r.rating;
      g.user_bias[r.user] += e + hp.reg * p.user_bias[r.user];
      g.item_bias[r.item] += e + hp.reg * p.item_bias[r.item];
      for (std::size_t f = 0; f < L; ++f) {
        g.P[r.user * L + f] += e * qj[f] + hp.reg * pu[f];
        g.Q[r.item * L + f] += e * pu[f] + hp.reg * qj[f];
      }
    }
    for (std::size_t i = 0; i < p.P.size(); ++i) p.P[i] -= 0.01 * g.P[i];
    for (std::size_t i = 0; i < p.Q.size(); ++i) p.Q[i] -= 0.01 * g.Q[i];
    for (std::size_t i = 0; i < 2; ++i) {
      p.user_bias[i] -= 0.01 * g.user_bias[i];
      p.item_bias[i] -= 0.01 * g.item_bias[i];
    }
  }
  for (const auto& r : ds.records()) {
    double oracle = p.global_mean + p.user_bias[r.user] + p.item_bias[r.item];
    for (std::size_t f = 0; f < L; ++f) oracle += p.P[r.user * L + f] * p.Q[r.item * L + f];
    EXPECT_NEAR(m.predict(r.user, r.item), r.rating, 0.1);
    EXPECT_NEAR(oracle, r.rating, 0.1);
    EXPECT_NEAR(m.predict(r.user, r.item), oracle, 0.05);
  }
}

TEST(FactorModel, PredictionsClampedToScale) {
  auto ds = random_dataset(71, 15, 15, 100);
  HyperParams hp;
  hp.max_iter = 0;
  hp.init_std = 3.0;
  for (auto v : {FactorVariant::regsvd, FactorVariant::biasedmf, FactorVariant::svdpp}) {
    auto m = train_latent_factor(ds, hp, v);
    for (UserIndex u = 0; u < 15; ++u)
      for (ItemIndex j = 0; j < 15; ++j) EXPECT_TRUE(ds.scale().contains(m.predict(u, j)));
  }
}

TEST(FactorModel, UnseenUsersAndItems) {
  auto ds = random_dataset(81, 10, 10, 60);
  auto hp = small_hp();
  auto reg = train_latent_factor(ds, hp, FactorVariant::regsvd);
  EXPECT_DOUBLE_EQ(reg.predict(999, 0), ds.mean_rating());
  auto pp = train_latent_factor(ds, hp, FactorVariant::svdpp);
  EXPECT_DOUBLE_EQ(pp.predict(999, 999), ds.scale().clamp(ds.mean_rating()));
  EXPECT_DOUBLE_EQ(pp.predict(999, 0), ds.scale().clamp(ds.mean_rating() + pp.params().item_bias[0]));
}

TEST(FactorModel, SaveLoadRoundTrip) {
  auto ds = random_dataset(91, 12, 9, 70);
  auto trust = random_trust(92, 12, 20);
  auto m = train_trust_svd(ds, trust, small_hp());
  std::stringstream buf;
  m.save(buf);
  const std::string first = buf.str();
  auto loaded = FactorModel::load(buf);
  EXPECT_EQ(loaded.params(), m.params());
  EXPECT_EQ(loaded.variant(), FactorVariant::trustsvd);
  for (UserIndex u = 0; u < 13; ++u)
    for (ItemIndex j = 0; j < 10; ++j) EXPECT_EQ(loaded.predict(u, j), m.predict(u, j));
  std::stringstream again;
  loaded.save(again);
  EXPECT_EQ(again.str(), first);

  std::istringstream bad("helltrust-factor-model 2\n");
  EXPECT_THROW(FactorModel::load(bad), ParseError);
}

TEST(FactorModel, Errors) {
  auto ds = random_dataset(101, 10, 10, 60);
  auto hp = small_hp();
  EXPECT_THROW(train_trust_svd(ds, TrustEdgeList::build(12, {{11, 0}}), hp), DomainError);
  EXPECT_THROW(train_latent_factor(ds, hp, FactorVariant::trustsvd), DomainError);
  EXPECT_THROW(train_latent_factor(RatingDataset{}, hp, FactorVariant::biasedmf), DomainError);
  auto bad = hp;
  bad.factors = 0;
  EXPECT_THROW(train_latent_factor(ds, bad, FactorVariant::biasedmf), DomainError);
}

TEST(FactorModel, DivergenceIsReported) {
  auto ds = random_dataset(111, 20, 20, 200);
  auto hp = small_hp();
  hp.learn_rate = 50.0;
  hp.max_iter = 50;
  try {
    train_latent_factor(ds, hp, FactorVariant::svdpp);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.epoch(), 1);
    EXPECT_LE(e.epoch(), 50);
  }
}

TEST(FactorVariantNames, RoundTrip) {
  for (auto v : {FactorVariant::regsvd, FactorVariant::biasedmf, FactorVariant::svdpp, FactorVariant::trustsvd})
    EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_THROW(parse_variant("svd"), ParseError);
  EXPECT_EQ(parse_reg_weighting("uniform"), RegWeighting::uniform);
  EXPECT_THROW(parse_reg_weighting("x"), ParseError);
}
