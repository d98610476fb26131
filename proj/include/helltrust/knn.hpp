#pragma once

// Neighborhood models with shrunk Pearson similarity.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "helltrust/dataset.hpp"
#include "helltrust/error.hpp"
#include "helltrust/predictor.hpp"

namespace helltrust {

/// Pearson correlation of two co-rated vectors, damped by n / (n + shrinkage).
/// Undefined (nullopt) for fewer than two co-ratings or a constant side.
inline std::optional<double> pcc_similarity(std::span<const double> a, std::span<const double> b,
                                            std::size_t shrinkage) {
  if (a.size() != b.size()) throw DomainError("pcc_similarity: vectors differ in length");
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  const double r = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
  return r * static_cast<double>(n) / static_cast<double>(n + shrinkage);
}

enum class KnnMode { user, item };

struct Neighbor {
  std::uint32_t index;
  double similarity;
};

/// Per-anchor neighbor lists sorted by descending similarity (ties by
/// index). Pairs with undefined similarity are left out. `limit` caps each
/// list; 0 keeps every defined neighbor.
class SimilarityTable {
 public:
  SimilarityTable() = default;

  static SimilarityTable build(const RatingDataset& ds, KnnMode mode, std::size_t shrinkage, std::size_t limit = 0) {
    const std::size_t anchors = mode == KnnMode::user ? ds.num_users() : ds.num_items();
    SimilarityTable table;
    table.lists_.resize(anchors);
    std::vector<double> va, vb;
    for (std::uint32_t a = 0; a < anchors; ++a) {
      for (std::uint32_t b = a + 1; b < anchors; ++b) {
        va.clear();
        vb.clear();
        if (mode == KnnMode::user)
          co_rated(ds.user_items(a), ds.user_items(b), va, vb, [](const ItemRating& e) { return e.item; });
        else
          co_rated(ds.item_users(a), ds.item_users(b), va, vb, [](const UserRating& e) { return e.user; });
        auto sim = pcc_similarity(va, vb, shrinkage);
        if (!sim) continue;
        table.lists_[a].push_back({b, *sim});
        table.lists_[b].push_back({a, *sim});
      }
    }
    for (auto& list : table.lists_) {
      std::sort(list.begin(), list.end(), [](const Neighbor& x, const Neighbor& y) {
        return x.similarity != y.similarity ? x.similarity > y.similarity : x.index < y.index;
      });
      if (limit && list.size() > limit) list.resize(limit);
    }
    return table;
  }

  std::size_t size() const noexcept { return lists_.size(); }
  std::span<const Neighbor> neighbors(std::uint32_t anchor) const { return lists_.at(anchor); }

 private:
  template <class Entry, class Key>
  static void co_rated(std::span<const Entry> x, std::span<const Entry> y, std::vector<double>& vx,
                       std::vector<double>& vy, Key key) {
    std::size_t i = 0, j = 0;
    while (i < x.size() && j < y.size()) {
      const auto kx = key(x[i]), ky = key(y[j]);
      if (kx == ky) {
        vx.push_back(x[i++].rating);
        vy.push_back(y[j++].rating);
      } else if (kx < ky) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  std::vector<std::vector<Neighbor>> lists_;
};

/// Mean-centered kNN. User mode predicts
///   mean_u + sum_v s_uv (r_vj - mean_v) / sum_v |s_uv|
/// over the `neighbors` most similar positively correlated users v who rated
/// j; item mode is the transpose. Falls back to the anchor mean, then the
/// global mean.
class KnnModel final : public Predictor {
 public:
  KnnModel(const RatingDataset& train, KnnMode mode, std::size_t neighbors, std::size_t shrinkage)
      : Predictor(train.scale()), train_(train), mode_(mode), k_(neighbors) {
    if (train.empty()) throw DomainError("knn: empty training set");
    if (neighbors == 0) throw DomainError("knn: neighbors must be >= 1");
    global_ = train.mean_rating();
    user_mean_ = means(train, KnnMode::user);
    item_mean_ = means(train, KnnMode::item);
    table_ = SimilarityTable::build(train, mode, shrinkage);
  }

  std::string name() const override { return mode_ == KnnMode::user ? "UserKNN" : "ItemKNN"; }
  const SimilarityTable& similarities() const noexcept { return table_; }

 protected:
  double score(UserIndex u, ItemIndex j) const override {
    const bool user_known = u < train_.num_users() && user_mean_[u].has_value();
    const bool item_known = j < train_.num_items() && item_mean_[j].has_value();
    if (mode_ == KnnMode::user) {
      if (!user_known) return global_;
      if (item_known) {
        if (auto v = weighted(table_.neighbors(u), train_.item_users(j), user_mean_,
                              [](const UserRating& e) { return e.user; }))
          return *user_mean_[u] + *v;
      }
      return *user_mean_[u];
    }
    if (!item_known) return global_;
    if (user_known) {
      if (auto v = weighted(table_.neighbors(j), train_.user_items(u), item_mean_,
                            [](const ItemRating& e) { return e.item; }))
        return *item_mean_[j] + *v;
    }
    return *item_mean_[j];
  }

 private:
  static std::vector<std::optional<double>> means(const RatingDataset& ds, KnnMode mode) {
    std::vector<std::optional<double>> out(mode == KnnMode::user ? ds.num_users() : ds.num_items());
    for (std::uint32_t a = 0; a < out.size(); ++a) {
      double s = 0.0;
      std::size_t n = 0;
      auto add = [&](const auto& entries) {
        for (const auto& e : entries) s += e.rating;
        n = entries.size();
      };
      if (mode == KnnMode::user) add(ds.user_items(a));
      else add(ds.item_users(a));
      if (n) out[a] = s / static_cast<double>(n);
    }
    return out;
  }

  // Walks the anchor's neighbor list in similarity order, keeping neighbors
  // present in `raters` (sorted by key) until k are found.
  template <class Entry, class Key>
  std::optional<double> weighted(std::span<const Neighbor> nbrs, std::span<const Entry> raters,
                                 const std::vector<std::optional<double>>& mean, Key key) const {
    double num = 0.0, den = 0.0;
    std::size_t used = 0;
    for (const auto& nb : nbrs) {
      if (nb.similarity <= 0.0 || used == k_) break;
      auto it = std::lower_bound(raters.begin(), raters.end(), nb.index,
                                 [&](const Entry& e, std::uint32_t v) { return key(e) < v; });
      if (it == raters.end() || key(*it) != nb.index) continue;
      num += nb.similarity * (it->rating - *mean[nb.index]);
      den += std::abs(nb.similarity);
      ++used;
    }
    if (den <= 0.0) return std::nullopt;
    return num / den;
  }

  RatingDataset train_;
  KnnMode mode_;
  std::size_t k_;
  double global_ = 0.0;
  std::vector<std::optional<double>> user_mean_;
  std::vector<std::optional<double>> item_mean_;
  SimilarityTable table_;
};

}  // namespace helltrust
