#pragma once

// Latent-factor rating models trained by SGD: RegSVD, BiasedMF, SVD++ and
// TrustSVD. Hell-TrustSVD is TrustSVD fed an extracted edge list.
//
// TrustSVD prediction:
//   r_uj = mu + b_u + b_j + q_j . (p_u + |I_u|^-1/2 sum_{i in I_u} y_i
//                                       + |T_u|^-1/2 sum_{v in T_u} w_v)
// Objective:
//   1/2 sum_(u,j) (r_uj - r)^2 + lambda_t/2 sum_(u,v) (w_v . p_u - t_uv)^2
//   + lambda/2 sum_u (|I_u|^-1/2 + lambda_t |T_u|^-1/2) |p_u|^2
//   + lambda/2 sum_j |U_j|^-1/2 (|q_j|^2 + |y_j|^2 + b_j^2)
//   + lambda/2 sum_u |I_u|^-1/2 b_u^2 + lambda/2 sum_v |T_v+|^-1/2 |w_v|^2
// with |S|^-1/2 read as 0 for an empty set S.
//
// Each SGD visit to a rating or trust entry applies the data gradient of
// that entry plus the regularization gradient of every parameter it touches.
// SVD++ is the same code path with no trust edges.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "helltrust/dataset.hpp"
#include "helltrust/error.hpp"
#include "helltrust/predictor.hpp"
#include "helltrust/random.hpp"

namespace helltrust {

enum class FactorVariant { regsvd, biasedmf, svdpp, trustsvd };

/// How SVD++/TrustSVD scale the L2 penalty of each parameter. `popularity`
/// uses the |S|^-1/2 weights of the TrustSVD objective; `uniform` replaces
/// every nonempty-set weight by 1 (the classic SVD++ penalty).
enum class RegWeighting { popularity, uniform };

inline std::string to_string(RegWeighting w) { return w == RegWeighting::uniform ? "uniform" : "popularity"; }

inline RegWeighting parse_reg_weighting(std::string_view s) {
  if (s == "uniform") return RegWeighting::uniform;
  if (s == "popularity") return RegWeighting::popularity;
  throw ParseError("unknown regularization weighting '" + std::string(s) + "'");
}

inline std::string to_string(FactorVariant v) {
  switch (v) {
    case FactorVariant::regsvd: return "regsvd";
    case FactorVariant::biasedmf: return "biasedmf";
    case FactorVariant::svdpp: return "svdpp";
    case FactorVariant::trustsvd: return "trustsvd";
  }
  return "unknown";
}

inline FactorVariant parse_variant(std::string_view s) {
  if (s == "regsvd") return FactorVariant::regsvd;
  if (s == "biasedmf") return FactorVariant::biasedmf;
  if (s == "svdpp") return FactorVariant::svdpp;
  if (s == "trustsvd") return FactorVariant::trustsvd;
  throw ParseError("unknown factor model variant '" + std::string(s) + "'");
}

struct HyperParams {
  std::size_t factors = 10;
  int max_iter = 100;
  double learn_rate = 0.01;
  double reg = 0.1;          // lambda
  double reg_social = 0.5;   // lambda_t
  std::uint64_t seed = 1;
  double init_std = 0.1;
  // unset: uniform for svdpp, popularity for trustsvd
  std::optional<RegWeighting> weighting;

  RegWeighting weighting_for(FactorVariant v) const {
    return weighting.value_or(v == FactorVariant::trustsvd ? RegWeighting::popularity : RegWeighting::uniform);
  }

  void validate() const {
    if (factors < 1) throw DomainError("factors must be >= 1");
    if (max_iter < 0) throw DomainError("max.iter must be >= 0");
    if (!(learn_rate > 0.0)) throw DomainError("learn.rate must be > 0");
    if (!(reg >= 0.0)) throw DomainError("reg must be >= 0");
    if (!(reg_social >= 0.0)) throw DomainError("reg.social must be >= 0");
    if (!(init_std >= 0.0)) throw DomainError("init.std must be >= 0");
  }

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

/// Raw parameter arrays. Matrices are row-major with `factors` columns; Y is
/// empty for RegSVD/BiasedMF and W is empty unless the variant is TrustSVD.
struct FactorParams {
  double global_mean = 0.0;
  std::vector<double> user_bias, item_bias;
  std::vector<double> P, Q, Y, W;

  friend bool operator==(const FactorParams&, const FactorParams&) = default;
};

namespace detail {

inline double inv_sqrt_or_zero(std::size_t n) { return n ? 1.0 / std::sqrt(static_cast<double>(n)) : 0.0; }

inline double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t f = 0; f < n; ++f) s += a[f] * b[f];
  return s;
}

/// Simple CSR adjacency (row -> sorted column ids).
struct Csr {
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> cols;

  std::span<const std::uint32_t> row(std::size_t r) const {
    return {cols.data() + offsets[r], cols.data() + offsets[r + 1]};
  }
  std::size_t rows() const noexcept { return offsets.size() - 1; }
  friend bool operator==(const Csr&, const Csr&) = default;
};

inline Csr user_item_csr(const RatingDataset& ds) {
  Csr c;
  for (UserIndex u = 0; u < ds.num_users(); ++u) {
    for (const auto& e : ds.user_items(u)) c.cols.push_back(e.item);
    c.offsets.push_back(c.cols.size());
  }
  return c;
}

inline Csr trust_csr(const TrustEdgeList& t, std::size_t num_users) {
  Csr c;
  for (UserIndex u = 0; u < num_users; ++u) {
    if (u < t.num_users())
      for (const auto& e : t.trusted_by(u)) c.cols.push_back(e.trustee);
    c.offsets.push_back(c.cols.size());
  }
  return c;
}

}  // namespace detail

class FactorTrainer;

/// A trained (or initialized) latent-factor model. Keeps the training
/// implicit-feedback sets I_u, trust sets T_u and item popularity so that it
/// predicts without the training data.
class FactorModel final : public Predictor {
 public:
  std::string name() const override {
    switch (variant_) {
      case FactorVariant::regsvd: return "RegSVD";
      case FactorVariant::biasedmf: return "BiasedMF";
      case FactorVariant::svdpp: return "SVD++";
      case FactorVariant::trustsvd: return "TrustSVD";
    }
    return "FactorModel";
  }

  FactorVariant variant() const noexcept { return variant_; }
  const HyperParams& hyper() const noexcept { return hp_; }
  std::size_t num_users() const noexcept { return num_users_; }
  std::size_t num_items() const noexcept { return num_items_; }
  std::size_t factors() const noexcept { return hp_.factors; }
  const FactorParams& params() const noexcept { return params_; }
  /// Mutable access for gradient checks; call refresh() after edits.
  FactorParams& mutable_params() noexcept { return params_; }

  bool uses_implicit() const noexcept {
    return variant_ == FactorVariant::svdpp || variant_ == FactorVariant::trustsvd;
  }
  bool uses_trust() const noexcept { return variant_ == FactorVariant::trustsvd; }
  bool uses_bias() const noexcept { return variant_ != FactorVariant::regsvd; }

  bool user_known(UserIndex u) const noexcept {
    return u < num_users_ && (!implicit_.row(u).empty() || (uses_trust() && !trust_.row(u).empty()));
  }
  bool item_known(ItemIndex j) const noexcept { return j < num_items_ && item_count_[j] > 0; }

  /// Recomputes the cached per-user vectors z_u from the parameters.
  void refresh() {
    const std::size_t L = hp_.factors;
    user_vec_.assign(num_users_ * L, 0.0);
    for (UserIndex u = 0; u < num_users_; ++u) compose_user(u, user_vec_.data() + u * L);
  }

  /// z_u = p_u (+ implicit and trust terms for SVD++/TrustSVD).
  void compose_user(UserIndex u, double* out) const {
    const std::size_t L = hp_.factors;
    const double* p = params_.P.data() + u * L;
    for (std::size_t f = 0; f < L; ++f) out[f] = p[f];
    if (uses_implicit()) {
      auto items = implicit_.row(u);
      const double w = detail::inv_sqrt_or_zero(items.size());
      for (auto i : items) {
        const double* y = params_.Y.data() + i * L;
        for (std::size_t f = 0; f < L; ++f) out[f] += w * y[f];
      }
    }
    if (uses_trust()) {
      auto trusted = trust_.row(u);
      const double w = detail::inv_sqrt_or_zero(trusted.size());
      for (auto v : trusted) {
        const double* wv = params_.W.data() + v * L;
        for (std::size_t f = 0; f < L; ++f) out[f] += w * wv[f];
      }
    }
  }

  void save(std::ostream& out) const;
  static FactorModel load(std::istream& in);

 protected:
  double score(UserIndex u, ItemIndex j) const override {
    const bool uk = user_known(u), ik = item_known(j);
    const std::size_t L = hp_.factors;
    if (variant_ == FactorVariant::regsvd) {
      if (!uk || !ik) return params_.global_mean;
      return detail::dot(params_.P.data() + u * L, params_.Q.data() + j * L, L);
    }
    double r = params_.global_mean;
    if (uk) r += params_.user_bias[u];
    if (ik) r += params_.item_bias[j];
    if (uk && ik) r += detail::dot(user_vec_.data() + u * L, params_.Q.data() + j * L, L);
    return r;
  }

 private:
  friend class FactorTrainer;

  FactorModel(FactorVariant variant, const HyperParams& hp, RatingScale scale, std::size_t num_users,
              std::size_t num_items)
      : Predictor(scale), variant_(variant), hp_(hp), num_users_(num_users), num_items_(num_items) {}

  FactorVariant variant_;
  HyperParams hp_;
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  FactorParams params_;
  detail::Csr implicit_;                    // I_u
  detail::Csr trust_;                       // T_u
  std::vector<std::uint32_t> item_count_;   // |U_j|
  std::vector<double> user_vec_;            // cached z_u
};

/// Called after every epoch with the 1-based epoch number.
using EpochObserver = std::function<void(int epoch, const FactorModel&)>;

/// Full-batch objective and its analytic gradient for TrustSVD/SVD++, plus
/// the SGD trainer shared by all variants.
class FactorTrainer {
 public:
  FactorTrainer(const RatingDataset& train, const TrustEdgeList& trust, FactorVariant variant, const HyperParams& hp)
      : train_(train), variant_(variant), hp_(hp) {
    hp.validate();
    if (train.empty()) throw DomainError("factor model: empty training set");
    if (variant == FactorVariant::trustsvd) {
      if (trust.num_users() != 0 && trust.num_users() != train.num_users())
        throw DomainError("trust edge list covers " + std::to_string(trust.num_users()) + " users, ratings cover " +
                          std::to_string(train.num_users()));
      for (const auto& e : trust.edges())
        if (e.truster >= train.num_users() || e.trustee >= train.num_users())
          throw DomainError("trust edge references unknown user");
      trust_ = trust;
      if (trust_.num_users() == 0) trust_ = TrustEdgeList(train.num_users());
    } else {
      trust_ = TrustEdgeList(train.num_users());
    }
    const std::size_t n = train.num_users(), m = train.num_items();
    const bool uniform = hp.weighting_for(variant) == RegWeighting::uniform;
    auto reg_weight = [&](std::size_t size) { return uniform ? (size ? 1.0 : 0.0) : detail::inv_sqrt_or_zero(size); };
    w_items_.resize(n);
    w_trust_.resize(n);
    rw_user_.resize(n);
    rw_trust_.resize(n);
    rw_trusters_.resize(n);
    rw_pop_.resize(m);
    for (UserIndex u = 0; u < n; ++u) {
      const std::size_t ni = train.user_items(u).size(), nt = trust_.trusted_by(u).size();
      w_items_[u] = detail::inv_sqrt_or_zero(ni);
      w_trust_[u] = detail::inv_sqrt_or_zero(nt);
      rw_user_[u] = reg_weight(ni);
      rw_trust_[u] = reg_weight(nt);
      rw_trusters_[u] = reg_weight(trust_.trusters_of(u).size());
    }
    for (ItemIndex j = 0; j < m; ++j) rw_pop_[j] = reg_weight(train.item_users(j).size());
  }

  /// Model with parameters drawn from Normal(0, init_std^2), biases zero.
  /// P, Q, Y, W are drawn in that order from one stream, so SVD++ and
  /// TrustSVD share P, Q, Y under the same seed.
  FactorModel initial_model() const {
    const std::size_t n = train_.num_users(), m = train_.num_items(), L = hp_.factors;
    FactorModel model(variant_, hp_, train_.scale(), n, m);
    auto& p = model.params_;
    p.global_mean = train_.mean_rating();
    p.user_bias.assign(n, 0.0);
    p.item_bias.assign(m, 0.0);
    Rng rng(derive_seed(hp_.seed, "factor-init"));
    auto draw = [&](std::vector<double>& v, std::size_t count) {
      v.resize(count);
      for (auto& x : v) x = hp_.init_std * rng.normal();
    };
    draw(p.P, n * L);
    draw(p.Q, m * L);
    if (model.uses_implicit()) draw(p.Y, m * L);
    if (model.uses_trust()) draw(p.W, n * L);
    model.implicit_ = detail::user_item_csr(train_);
    model.trust_ = detail::trust_csr(trust_, n);
    model.item_count_.resize(m);
    for (ItemIndex j = 0; j < m; ++j) model.item_count_[j] = static_cast<std::uint32_t>(train_.item_users(j).size());
    model.refresh();
    return model;
  }

  FactorModel train(const EpochObserver& observer = {}) const {
    FactorModel model = initial_model();
    std::vector<std::size_t> order(train_.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(hp_.seed, "factor-shuffle"));
    for (int epoch = 1; epoch <= hp_.max_iter; ++epoch) {
      rng.shuffle(std::span<std::size_t>(order));
      const double loss = run_epoch(model, order);
      if (!std::isfinite(loss) || !all_finite(model.params_)) throw DivergenceError(epoch);
      if (observer) {
        model.refresh();
        observer(epoch, model);
      }
    }
    model.refresh();
    return model;
  }

  /// Objective value at `model` (see the header comment). For RegSVD and
  /// BiasedMF the L2 penalty is summed per rating, as the SGD applies it.
  double objective(const FactorModel& model) const {
    const auto& p = model.params_;
    const std::size_t L = hp_.factors;
    const double lambda = hp_.reg, lambda_t = hp_.reg_social;
    std::vector<double> z(L);
    double loss = 0.0;
    for (const auto& r : train_.records()) {
      model.compose_user(r.user, z.data());
      double pred = detail::dot(z.data(), p.Q.data() + r.item * L, L);
      if (model.uses_bias()) pred += p.global_mean + p.user_bias[r.user] + p.item_bias[r.item];
      const double e = pred - r.rating;
      loss += 0.5 * e * e;
    }
    if (!model.uses_implicit()) {
      double sq = 0.0;
      for (const auto& r : train_.records()) {
        sq += detail::dot(p.P.data() + r.user * L, p.P.data() + r.user * L, L);
        sq += detail::dot(p.Q.data() + r.item * L, p.Q.data() + r.item * L, L);
        if (model.uses_bias()) sq += p.user_bias[r.user] * p.user_bias[r.user] + p.item_bias[r.item] * p.item_bias[r.item];
      }
      return loss + 0.5 * lambda * sq;
    }
    for (const auto& e : trust_.edges()) {
      const double et = detail::dot(p.W.data() + e.trustee * L, p.P.data() + e.truster * L, L) - e.weight;
      loss += 0.5 * lambda_t * et * et;
    }
    for (UserIndex u = 0; u < train_.num_users(); ++u) {
      const double pu2 = detail::dot(p.P.data() + u * L, p.P.data() + u * L, L);
      loss += 0.5 * lambda * (rw_user_[u] + lambda_t * rw_trust_[u]) * pu2;
      loss += 0.5 * lambda * rw_user_[u] * p.user_bias[u] * p.user_bias[u];
      if (model.uses_trust())
        loss += 0.5 * lambda * rw_trusters_[u] * detail::dot(p.W.data() + u * L, p.W.data() + u * L, L);
    }
    for (ItemIndex j = 0; j < train_.num_items(); ++j) {
      const double q2 = detail::dot(p.Q.data() + j * L, p.Q.data() + j * L, L);
      const double y2 = detail::dot(p.Y.data() + j * L, p.Y.data() + j * L, L);
      loss += 0.5 * lambda * rw_pop_[j] * (q2 + y2 + p.item_bias[j] * p.item_bias[j]);
    }
    return loss;
  }

  /// Analytic gradient of objective() for SVD++/TrustSVD.
  FactorParams gradient(const FactorModel& model) const {
    if (!model.uses_implicit()) throw DomainError("gradient: only defined for svdpp/trustsvd");
    const auto& p = model.params_;
    const std::size_t L = hp_.factors, n = train_.num_users(), m = train_.num_items();
    const double lambda = hp_.reg, lambda_t = hp_.reg_social;
    FactorParams g;
    g.user_bias.assign(n, 0.0);
    g.item_bias.assign(m, 0.0);
    g.P.assign(n * L, 0.0);
    g.Q.assign(m * L, 0.0);
    g.Y.assign(m * L, 0.0);
    g.W.assign(p.W.size(), 0.0);
    std::vector<double> z(L);
    for (const auto& r : train_.records()) {
      const UserIndex u = r.user;
      const ItemIndex j = r.item;
      model.compose_user(u, z.data());
      const double* q = p.Q.data() + j * L;
      const double e = p.global_mean + p.user_bias[u] + p.item_bias[j] + detail::dot(z.data(), q, L) - r.rating;
      g.global_mean += e;
      g.user_bias[u] += e;
      g.item_bias[j] += e;
      for (std::size_t f = 0; f < L; ++f) {
        g.P[u * L + f] += e * q[f];
        g.Q[j * L + f] += e * z[f];
      }
      for (const auto& it : train_.user_items(u))
        for (std::size_t f = 0; f < L; ++f) g.Y[it.item * L + f] += e * w_items_[u] * q[f];
      if (model.uses_trust())
        for (const auto& t : trust_.trusted_by(u))
          for (std::size_t f = 0; f < L; ++f) g.W[t.trustee * L + f] += e * w_trust_[u] * q[f];
    }
    for (const auto& t : trust_.edges()) {
      const double* pu = p.P.data() + t.truster * L;
      const double* wv = p.W.data() + t.trustee * L;
      const double et = detail::dot(wv, pu, L) - t.weight;
      for (std::size_t f = 0; f < L; ++f) {
        g.P[t.truster * L + f] += lambda_t * et * wv[f];
        g.W[t.trustee * L + f] += lambda_t * et * pu[f];
      }
    }
    for (UserIndex u = 0; u < n; ++u) {
      const double wp = lambda * (rw_user_[u] + lambda_t * rw_trust_[u]);
      for (std::size_t f = 0; f < L; ++f) g.P[u * L + f] += wp * p.P[u * L + f];
      g.user_bias[u] += lambda * rw_user_[u] * p.user_bias[u];
      if (model.uses_trust())
        for (std::size_t f = 0; f < L; ++f) g.W[u * L + f] += lambda * rw_trusters_[u] * p.W[u * L + f];
    }
    for (ItemIndex j = 0; j < m; ++j) {
      for (std::size_t f = 0; f < L; ++f) {
        g.Q[j * L + f] += lambda * rw_pop_[j] * p.Q[j * L + f];
        g.Y[j * L + f] += lambda * rw_pop_[j] * p.Y[j * L + f];
      }
      g.item_bias[j] += lambda * rw_pop_[j] * p.item_bias[j];
    }
    g.global_mean = 0.0;  // mu is fixed to the training mean, not learned
    return g;
  }

  /// One SGD pass in the given rating order. Trust edges of a user are
  /// visited just before that user's first rating of the epoch; trusters
  /// without ratings follow the rating pass. Returns the summed squared
  /// rating error (before updates) for the divergence check.
  double run_epoch(FactorModel& model, std::span<const std::size_t> order) const {
    const std::size_t L = hp_.factors;
    std::vector<double> z(L), qold(L), grad_y(L);
    std::vector<char> visited;
    if (model.uses_trust()) visited.assign(train_.num_users(), 0);
    double sse = 0.0;
    for (std::size_t pos : order) {
      const auto& r = train_.records()[pos];
      if (model.uses_trust() && !visited[r.user]) {
        visited[r.user] = 1;
        sse += trust_step(model, r.user);
      }
      sse += rating_step(model, r, z, qold, grad_y);
    }
    if (model.uses_trust())
      for (UserIndex u = 0; u < train_.num_users(); ++u)
        if (!visited[u]) sse += trust_step(model, u);
    return sse;
  }

  const TrustEdgeList& trust() const noexcept { return trust_; }

 private:
  static bool all_finite(const FactorParams& p) {
    auto ok = [](const std::vector<double>& v) {
      for (double x : v)
        if (!std::isfinite(x)) return false;
      return true;
    };
    return std::isfinite(p.global_mean) && ok(p.user_bias) && ok(p.item_bias) && ok(p.P) && ok(p.Q) && ok(p.Y) &&
           ok(p.W);
  }

  double rating_step(FactorModel& model, const RatingRecord& r, std::vector<double>& z, std::vector<double>& qold,
                     std::vector<double>& grad_y) const {
    auto& p = model.params_;
    const std::size_t L = hp_.factors;
    const double lr = hp_.learn_rate, lambda = hp_.reg;
    const UserIndex u = r.user;
    const ItemIndex j = r.item;
    double* pu = p.P.data() + u * L;
    double* qj = p.Q.data() + j * L;

    if (variant_ == FactorVariant::regsvd || variant_ == FactorVariant::biasedmf) {
      double pred = detail::dot(pu, qj, L);
      if (variant_ == FactorVariant::biasedmf) pred += p.global_mean + p.user_bias[u] + p.item_bias[j];
      const double e = pred - r.rating;
      if (variant_ == FactorVariant::biasedmf) {
        p.user_bias[u] -= lr * (e + lambda * p.user_bias[u]);
        p.item_bias[j] -= lr * (e + lambda * p.item_bias[j]);
      }
      for (std::size_t f = 0; f < L; ++f) {
        const double puf = pu[f], qjf = qj[f];
        pu[f] -= lr * (e * qjf + lambda * puf);
        qj[f] -= lr * (e * puf + lambda * qjf);
      }
      return e * e;
    }

    model.compose_user(u, z.data());
    const double e = p.global_mean + p.user_bias[u] + p.item_bias[j] + detail::dot(z.data(), qj, L) - r.rating;
    const double wi = w_items_[u], ru = lambda * rw_user_[u], rj = lambda * rw_pop_[j];
    p.user_bias[u] -= lr * (e + ru * p.user_bias[u]);
    p.item_bias[j] -= lr * (e + rj * p.item_bias[j]);
    // the lambda_t |T_u|^-1/2 share of p_u's penalty is applied in trust_step
    for (std::size_t f = 0; f < L; ++f) {
      qold[f] = qj[f];
      const double puf = pu[f];
      pu[f] -= lr * (e * qj[f] + ru * puf);
      qj[f] -= lr * (e * z[f] + rj * qj[f]);
    }
    for (std::size_t f = 0; f < L; ++f) grad_y[f] = e * wi * qold[f];
    for (const auto& it : train_.user_items(u)) {
      double* y = p.Y.data() + it.item * L;
      const double wy = lambda * rw_pop_[it.item];
      for (std::size_t f = 0; f < L; ++f) y[f] -= lr * (grad_y[f] + wy * y[f]);
    }
    if (model.uses_trust()) {
      const double wt = w_trust_[u];
      for (const auto& t : trust_.trusted_by(u)) {
        double* wv = p.W.data() + t.trustee * L;
        const double ww = lambda * rw_trusters_[t.trustee];
        for (std::size_t f = 0; f < L; ++f) wv[f] -= lr * (e * wt * qold[f] + ww * wv[f]);
      }
    }
    return e * e;
  }

  double trust_step(FactorModel& model, UserIndex u) const {
    auto& p = model.params_;
    const std::size_t L = hp_.factors;
    const double lr = hp_.learn_rate, lambda = hp_.reg, lambda_t = hp_.reg_social;
    double* pu = p.P.data() + u * L;
    const double wp = lambda * lambda_t * rw_trust_[u];
    double sse = 0.0;
    for (const auto& t : trust_.trusted_by(u)) {
      double* wv = p.W.data() + t.trustee * L;
      const double et = detail::dot(wv, pu, L) - t.weight;
      const double ww = lambda * rw_trusters_[t.trustee];
      for (std::size_t f = 0; f < L; ++f) {
        const double puf = pu[f], wvf = wv[f];
        pu[f] -= lr * (lambda_t * et * wvf + wp * puf);
        wv[f] -= lr * (lambda_t * et * puf + ww * wvf);
      }
      sse += lambda_t * et * et;
    }
    return sse;
  }

  const RatingDataset& train_;
  TrustEdgeList trust_;
  FactorVariant variant_;
  HyperParams hp_;
  std::vector<double> w_items_;      // |I_u|^-1/2 in the prediction
  std::vector<double> w_trust_;      // |T_u|^-1/2 in the prediction
  std::vector<double> rw_user_;      // penalty weights: |I_u|^-1/2
  std::vector<double> rw_trust_;     // |T_u|^-1/2
  std::vector<double> rw_trusters_;  // |T_v+|^-1/2
  std::vector<double> rw_pop_;       // |U_j|^-1/2
};

inline FactorModel train_latent_factor(const RatingDataset& train, const HyperParams& hp, FactorVariant variant,
                                       const EpochObserver& observer = {}) {
  if (variant == FactorVariant::trustsvd) throw DomainError("train_latent_factor: use train_trust_svd for trustsvd");
  return FactorTrainer(train, TrustEdgeList(train.num_users()), variant, hp).train(observer);
}

inline FactorModel train_trust_svd(const RatingDataset& train, const TrustEdgeList& trust, const HyperParams& hp,
                                   const EpochObserver& observer = {}) {
  return FactorTrainer(train, trust, FactorVariant::trustsvd, hp).train(observer);
}

// Text dump: every real is written as a C99 hex-float so a reload
// reproduces predictions bit for bit.
inline void FactorModel::save(std::ostream& out) const {
  char buf[64];
  auto real = [&](double x) {
    std::snprintf(buf, sizeof buf, "%a", x);
    out << buf;
  };
  auto reals = [&](const char* tag, const std::vector<double>& v) {
    out << tag << ' ' << v.size();
    for (double x : v) {
      out << ' ';
      real(x);
    }
    out << '\n';
  };
  auto csr = [&](const char* tag, const detail::Csr& c) {
    out << tag << ' ' << c.rows() << ' ' << c.cols.size() << '\n';
    for (std::size_t r = 0; r < c.rows(); ++r) {
      out << c.offsets[r + 1] - c.offsets[r];
      for (auto col : c.row(r)) out << ' ' << col;
      out << '\n';
    }
  };
  out << "helltrust-factor-model 1\n";
  out << "variant " << to_string(variant_) << '\n';
  out << "scale ";
  real(scale().min);
  out << ' ';
  real(scale().max);
  out << '\n';
  out << "dims " << num_users_ << ' ' << num_items_ << ' ' << hp_.factors << '\n';
  out << "hyper " << hp_.max_iter << ' ';
  real(hp_.learn_rate);
  out << ' ';
  real(hp_.reg);
  out << ' ';
  real(hp_.reg_social);
  out << ' ' << hp_.seed << ' ';
  real(hp_.init_std);
  out << ' ' << to_string(hp_.weighting_for(variant_)) << '\n';
  out << "global_mean ";
  real(params_.global_mean);
  out << '\n';
  reals("user_bias", params_.user_bias);
  reals("item_bias", params_.item_bias);
  reals("P", params_.P);
  reals("Q", params_.Q);
  reals("Y", params_.Y);
  reals("W", params_.W);
  out << "item_count " << item_count_.size();
  for (auto c : item_count_) out << ' ' << c;
  out << '\n';
  csr("implicit", implicit_);
  csr("trust", trust_);
}

inline FactorModel FactorModel::load(std::istream& in) {
  std::string tok;
  auto expect = [&](const char* tag) {
    if (!(in >> tok) || tok != tag) throw ParseError(std::string("model file: expected '") + tag + "'");
  };
  auto real = [&]() {
    if (!(in >> tok)) throw ParseError("model file: truncated");
    char* end = nullptr;
    const double x = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw ParseError("model file: bad number '" + tok + "'");
    return x;
  };
  auto integer = [&]() {
    unsigned long long v;
    if (!(in >> v)) throw ParseError("model file: truncated");
    return static_cast<std::size_t>(v);
  };
  auto reals = [&](const char* tag, std::vector<double>& v) {
    expect(tag);
    v.resize(integer());
    for (auto& x : v) x = real();
  };
  auto csr = [&](const char* tag, detail::Csr& c) {
    expect(tag);
    const std::size_t rows = integer();
    integer();
    c = detail::Csr{};
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t len = integer();
      for (std::size_t k = 0; k < len; ++k) c.cols.push_back(static_cast<std::uint32_t>(integer()));
      c.offsets.push_back(c.cols.size());
    }
  };

  expect("helltrust-factor-model");
  if (integer() != 1) throw ParseError("model file: unsupported version");
  expect("variant");
  in >> tok;
  const FactorVariant variant = parse_variant(tok);
  expect("scale");
  RatingScale scale;
  scale.min = real();
  scale.max = real();
  expect("dims");
  const std::size_t n = integer(), m = integer();
  HyperParams hp;
  hp.factors = integer();
  expect("hyper");
  hp.max_iter = static_cast<int>(integer());
  hp.learn_rate = real();
  hp.reg = real();
  hp.reg_social = real();
  hp.seed = integer();
  hp.init_std = real();
  in >> tok;
  hp.weighting = parse_reg_weighting(tok);

  FactorModel model(variant, hp, scale, n, m);
  expect("global_mean");
  model.params_.global_mean = real();
  reals("user_bias", model.params_.user_bias);
  reals("item_bias", model.params_.item_bias);
  reals("P", model.params_.P);
  reals("Q", model.params_.Q);
  reals("Y", model.params_.Y);
  reals("W", model.params_.W);
  expect("item_count");
  model.item_count_.resize(integer());
  for (auto& c : model.item_count_) c = static_cast<std::uint32_t>(integer());
  csr("implicit", model.implicit_);
  csr("trust", model.trust_);

  const std::size_t L = hp.factors;
  const bool ok = model.params_.user_bias.size() == n && model.params_.item_bias.size() == m &&
                  model.params_.P.size() == n * L && model.params_.Q.size() == m * L &&
                  model.params_.Y.size() == (model.uses_implicit() ? m * L : 0) &&
                  model.params_.W.size() == (model.uses_trust() ? n * L : 0) && model.item_count_.size() == m &&
                  model.implicit_.rows() == n && model.trust_.rows() == n;
  if (!ok) throw ParseError("model file: inconsistent dimensions");
  model.refresh();
  return model;
}

}  // namespace helltrust
