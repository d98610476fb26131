#pragma once

// Rating-only baselines: global/user/item means and weighted SlopeOne.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "helltrust/dataset.hpp"
#include "helltrust/error.hpp"
#include "helltrust/predictor.hpp"

namespace helltrust {

enum class MeanKind { global, user, item };

class MeanModel final : public Predictor {
 public:
  MeanModel(const RatingDataset& train, MeanKind kind) : Predictor(train.scale()), kind_(kind) {
    if (train.empty()) throw DomainError("mean model: empty training set");
    global_ = train.mean_rating();
    if (kind == MeanKind::user) {
      means_.resize(train.num_users());
      for (UserIndex u = 0; u < train.num_users(); ++u) means_[u] = mean_of(train.user_items(u));
    } else if (kind == MeanKind::item) {
      means_.resize(train.num_items());
      for (ItemIndex j = 0; j < train.num_items(); ++j) means_[j] = mean_of(train.item_users(j));
    }
  }

  std::string name() const override {
    switch (kind_) {
      case MeanKind::global: return "GlobalAvg";
      case MeanKind::user: return "UserAvg";
      case MeanKind::item: return "ItemAvg";
    }
    return "Mean";
  }

  double global_mean() const noexcept { return global_; }

 protected:
  double score(UserIndex u, ItemIndex j) const override {
    const std::size_t key = kind_ == MeanKind::user ? u : j;
    if (kind_ == MeanKind::global || key >= means_.size() || !means_[key]) return global_;
    return *means_[key];
  }

 private:
  template <class Entries>
  static std::optional<double> mean_of(const Entries& entries) {
    if (entries.empty()) return std::nullopt;
    double sum = 0.0;
    for (const auto& e : entries) sum += e.rating;
    return sum / static_cast<double>(entries.size());
  }

  MeanKind kind_;
  double global_ = 0.0;
  std::vector<std::optional<double>> means_;
};

/// Weighted SlopeOne. For target item j and each item i the user rated,
/// dev(j, i) is the mean of r_j - r_i over users who rated both; the
/// prediction is sum_i (dev(j, i) + r_ui) c_ji / sum_i c_ji with c_ji the
/// co-rater count. Falls back to the user's mean, then the global mean.
class SlopeOneModel final : public Predictor {
 public:
  explicit SlopeOneModel(const RatingDataset& train) : Predictor(train.scale()), train_(train) {
    if (train.empty()) throw DomainError("slope one: empty training set");
    global_ = train.mean_rating();
    const std::size_t m = train.num_items();
    user_mean_.assign(train.num_users(), global_);
    for (UserIndex u = 0; u < train.num_users(); ++u) {
      auto items = train.user_items(u);
      if (items.empty()) continue;
      double s = 0.0;
      for (const auto& e : items) s += e.rating;
      user_mean_[u] = s / static_cast<double>(items.size());
    }

    // Row j accumulates over every user who rated j; a dense scratch row is
    // compacted into (item, dev, count) triples sorted by item.
    offsets_.assign(m + 1, 0);
    std::vector<double> diff_sum(m, 0.0);
    std::vector<std::uint32_t> count(m, 0);
    std::vector<ItemIndex> touched;
    for (ItemIndex j = 0; j < m; ++j) {
      touched.clear();
      for (const auto& rater : train.item_users(j)) {
        for (const auto& e : train.user_items(rater.user)) {
          if (e.item == j) continue;
          if (count[e.item]++ == 0) touched.push_back(e.item);
          diff_sum[e.item] += rater.rating - e.rating;
        }
      }
      std::sort(touched.begin(), touched.end());
      for (ItemIndex i : touched) {
        entries_.push_back({i, diff_sum[i] / count[i], count[i]});
        diff_sum[i] = 0.0;
        count[i] = 0;
      }
      offsets_[j + 1] = entries_.size();
    }
  }

  std::string name() const override { return "SlopeOne"; }

  /// dev(j, i) and its support, or count 0 when no user rated both.
  std::pair<double, std::uint32_t> deviation(ItemIndex j, ItemIndex i) const {
    auto first = entries_.begin() + static_cast<std::ptrdiff_t>(offsets_[j]);
    auto last = entries_.begin() + static_cast<std::ptrdiff_t>(offsets_[j + 1]);
    auto it = std::lower_bound(first, last, i, [](const Entry& e, ItemIndex v) { return e.item < v; });
    if (it == last || it->item != i) return {0.0, 0};
    return {it->dev, it->count};
  }

 protected:
  double score(UserIndex u, ItemIndex j) const override {
    if (u >= train_.num_users()) return global_;
    auto items = train_.user_items(u);
    if (items.empty()) return global_;
    if (j >= train_.num_items()) return user_mean_[u];
    // merge the user's sorted items with row j
    std::size_t k = offsets_[j];
    const std::size_t end = offsets_[j + 1];
    double num = 0.0, den = 0.0;
    for (const auto& e : items) {
      while (k < end && entries_[k].item < e.item) ++k;
      if (k == end) break;
      if (entries_[k].item != e.item) continue;
      num += (entries_[k].dev + e.rating) * entries_[k].count;
      den += entries_[k].count;
    }
    return den > 0.0 ? num / den : user_mean_[u];
  }

 private:
  struct Entry {
    ItemIndex item;
    double dev;
    std::uint32_t count;
  };

  RatingDataset train_;
  double global_ = 0.0;
  std::vector<double> user_mean_;
  std::vector<std::size_t> offsets_;
  std::vector<Entry> entries_;
};

}  // namespace helltrust
