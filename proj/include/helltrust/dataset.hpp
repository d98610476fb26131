#pragma once

// Rating and trust data: parsing, dense id remapping, inverted indexes,
// statistics and k-fold splits.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <istream>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "helltrust/error.hpp"
#include "helltrust/random.hpp"

namespace helltrust {

using UserIndex = std::uint32_t;
using ItemIndex = std::uint32_t;

struct RatingScale {
  double min = 1.0;
  double max = 5.0;

  bool contains(double r) const noexcept { return r >= min && r <= max; }
  double clamp(double r) const noexcept { return std::clamp(r, min, max); }
};

struct RatingRecord {
  UserIndex user;
  ItemIndex item;
  double rating;
};

struct ItemRating {
  ItemIndex item;
  double rating;
};

struct UserRating {
  UserIndex user;
  double rating;
};

/// Bijection between raw string ids and dense indices, in first-appearance
/// order.
class IdMap {
 public:
  std::uint32_t intern(std::string_view raw) {
    auto [it, inserted] = index_.try_emplace(std::string(raw), static_cast<std::uint32_t>(raw_.size()));
    if (inserted) raw_.emplace_back(raw);
    return it->second;
  }

  std::optional<std::uint32_t> find(std::string_view raw) const {
    auto it = index_.find(std::string(raw));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& raw(std::uint32_t index) const { return raw_.at(index); }
  std::size_t size() const noexcept { return raw_.size(); }

 private:
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<std::string> raw_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

/// Splits on runs of whitespace and/or commas.
inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto is_sep = [](char c) { return c == ' ' || c == '\t' || c == ',' || c == '\r' || c == ';'; };
  while (i < line.size()) {
    while (i < line.size() && is_sep(line[i])) ++i;
    std::size_t start = i;
    while (i < line.size() && !is_sep(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline std::optional<double> parse_real(std::string_view s) {
  double value = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

/// Calls fn(line_number, fields) for every non-blank, non-comment line.
template <class Fn>
void for_each_data_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    fn(line_no, split_fields(view));
  }
  if (in.bad()) throw ParseError("read failure");
}

inline std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace detail

/// Immutable user-item rating set with CSR inverted indexes I_u and U_j.
/// Training subsets share the parent's index space, so ids remain valid
/// across folds.
class RatingDataset {
 public:
  RatingDataset() = default;

  /// Builds from dense-index records. Counts default to max index + 1. A
  /// repeated (user, item) pair keeps the last rating.
  static RatingDataset from_records(std::vector<RatingRecord> records, RatingScale scale,
                                    std::size_t num_users = 0, std::size_t num_items = 0) {
    for (const auto& r : records) {
      num_users = std::max<std::size_t>(num_users, std::size_t{r.user} + 1);
      num_items = std::max<std::size_t>(num_items, std::size_t{r.item} + 1);
    }
    auto users = std::make_shared<IdMap>();
    auto items = std::make_shared<IdMap>();
    for (std::size_t u = 0; u < num_users; ++u) users->intern(std::to_string(u));
    for (std::size_t j = 0; j < num_items; ++j) items->intern(std::to_string(j));
    RatingDataset ds;
    ds.scale_ = scale;
    ds.users_ = std::move(users);
    ds.items_ = std::move(items);
    ds.num_users_ = num_users;
    ds.num_items_ = num_items;
    ds.records_ = dedupe(std::move(records), ds.duplicates_);
    for (const auto& r : ds.records_)
      if (!scale.contains(r.rating)) throw DomainError("rating " + std::to_string(r.rating) + " outside scale");
    ds.build_index();
    return ds;
  }

  /// Parses "user item rating [ignored...]" lines. Ids are remapped to dense
  /// indices in first-appearance order.
  static RatingDataset parse(std::istream& in, RatingScale scale) {
    if (!(scale.min < scale.max)) throw ParseError("rating scale must satisfy min < max");
    auto users = std::make_shared<IdMap>();
    auto items = std::make_shared<IdMap>();
    std::vector<RatingRecord> records;
    detail::for_each_data_line(in, [&](std::size_t line_no, const std::vector<std::string_view>& f) {
      if (f.size() < 3) throw ParseError("expected user, item, rating", line_no);
      auto rating = detail::parse_real(f[2]);
      if (!rating) throw ParseError("invalid rating '" + std::string(f[2]) + "'", line_no);
      if (!scale.contains(*rating))
        throw ParseError("rating " + std::string(f[2]) + " outside [" + std::to_string(scale.min) + ", " +
                             std::to_string(scale.max) + "]",
                         line_no);
      records.push_back({users->intern(f[0]), items->intern(f[1]), *rating});
    });
    if (records.empty()) throw ParseError("no ratings in input");
    RatingDataset ds;
    ds.scale_ = scale;
    ds.num_users_ = users->size();
    ds.num_items_ = items->size();
    ds.users_ = std::move(users);
    ds.items_ = std::move(items);
    ds.records_ = dedupe(std::move(records), ds.duplicates_);
    ds.build_index();
    return ds;
  }

  /// Dataset restricted to the given record positions, same id space.
  RatingDataset subset(std::span<const std::size_t> positions) const {
    RatingDataset ds;
    ds.scale_ = scale_;
    ds.users_ = users_;
    ds.items_ = items_;
    ds.num_users_ = num_users_;
    ds.num_items_ = num_items_;
    ds.records_.reserve(positions.size());
    for (std::size_t p : positions) ds.records_.push_back(records_.at(p));
    ds.build_index();
    return ds;
  }

  std::size_t num_users() const noexcept { return num_users_; }
  std::size_t num_items() const noexcept { return num_items_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const RatingScale& scale() const noexcept { return scale_; }
  std::span<const RatingRecord> records() const noexcept { return records_; }
  std::size_t duplicates() const noexcept { return duplicates_; }

  /// I_u sorted by item index.
  std::span<const ItemRating> user_items(UserIndex u) const {
    return {user_entries_.data() + user_offsets_[u], user_entries_.data() + user_offsets_[u + 1]};
  }
  /// U_j sorted by user index.
  std::span<const UserRating> item_users(ItemIndex j) const {
    return {item_entries_.data() + item_offsets_[j], item_entries_.data() + item_offsets_[j + 1]};
  }

  const IdMap& user_ids() const noexcept { return *users_; }
  const IdMap& item_ids() const noexcept { return *items_; }

  double mean_rating() const {
    if (records_.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& r : records_) sum += r.rating;
    return sum / static_cast<double>(records_.size());
  }

 private:
  static std::vector<RatingRecord> dedupe(std::vector<RatingRecord> records, std::size_t& duplicates) {
    std::unordered_map<std::uint64_t, std::size_t> seen;
    seen.reserve(records.size());
    std::vector<RatingRecord> out;
    out.reserve(records.size());
    duplicates = 0;
    for (const auto& r : records) {
      auto [it, inserted] = seen.try_emplace(detail::pair_key(r.user, r.item), out.size());
      if (inserted) {
        out.push_back(r);
      } else {
        out[it->second].rating = r.rating;
        ++duplicates;
      }
    }
    return out;
  }

  void build_index() {
    user_offsets_.assign(num_users_ + 1, 0);
    item_offsets_.assign(num_items_ + 1, 0);
    for (const auto& r : records_) {
      ++user_offsets_[r.user + 1];
      ++item_offsets_[r.item + 1];
    }
    std::partial_sum(user_offsets_.begin(), user_offsets_.end(), user_offsets_.begin());
    std::partial_sum(item_offsets_.begin(), item_offsets_.end(), item_offsets_.begin());
    user_entries_.resize(records_.size());
    item_entries_.resize(records_.size());
    std::vector<std::size_t> ucur(user_offsets_.begin(), user_offsets_.end() - 1);
    std::vector<std::size_t> icur(item_offsets_.begin(), item_offsets_.end() - 1);
    for (const auto& r : records_) {
      user_entries_[ucur[r.user]++] = {r.item, r.rating};
      item_entries_[icur[r.item]++] = {r.user, r.rating};
    }
    for (std::size_t u = 0; u < num_users_; ++u)
      std::sort(user_entries_.begin() + static_cast<std::ptrdiff_t>(user_offsets_[u]),
                user_entries_.begin() + static_cast<std::ptrdiff_t>(user_offsets_[u + 1]),
                [](const ItemRating& a, const ItemRating& b) { return a.item < b.item; });
    for (std::size_t j = 0; j < num_items_; ++j)
      std::sort(item_entries_.begin() + static_cast<std::ptrdiff_t>(item_offsets_[j]),
                item_entries_.begin() + static_cast<std::ptrdiff_t>(item_offsets_[j + 1]),
                [](const UserRating& a, const UserRating& b) { return a.user < b.user; });
  }

  RatingScale scale_;
  std::shared_ptr<const IdMap> users_ = std::make_shared<IdMap>();
  std::shared_ptr<const IdMap> items_ = std::make_shared<IdMap>();
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::size_t duplicates_ = 0;
  std::vector<RatingRecord> records_;
  std::vector<std::size_t> user_offsets_{0};
  std::vector<std::size_t> item_offsets_{0};
  std::vector<ItemRating> user_entries_;
  std::vector<UserRating> item_entries_;
};

inline RatingDataset parse_ratings(std::istream& in, RatingScale scale) { return RatingDataset::parse(in, scale); }

struct TrustEdge {
  UserIndex truster;
  UserIndex trustee;
  double weight = 1.0;

  friend bool operator==(const TrustEdge&, const TrustEdge&) = default;
};

/// Directed user-user edges, sorted by (truster, trustee), with out (T_u) and
/// in (T_v+) adjacency.
class TrustEdgeList {
 public:
  struct BuildCounts {
    std::size_t self_loops = 0;
    std::size_t duplicates = 0;
  };

  TrustEdgeList() = default;
  explicit TrustEdgeList(std::size_t num_users) : num_users_(num_users) { build_adjacency(); }

  /// Drops self-loops, keeps the last weight of a repeated pair. Endpoints
  /// must lie in [0, num_users).
  static TrustEdgeList build(std::size_t num_users, std::vector<TrustEdge> edges, BuildCounts* counts = nullptr) {
    BuildCounts local;
    std::vector<TrustEdge> kept;
    kept.reserve(edges.size());
    for (const auto& e : edges) {
      if (e.truster >= num_users || e.trustee >= num_users)
        throw DomainError("trust edge references unknown user index " +
                          std::to_string(std::max(e.truster, e.trustee)));
      if (!std::isfinite(e.weight)) throw DomainError("non-finite trust weight");
      if (e.truster == e.trustee) {
        ++local.self_loops;
        continue;
      }
      kept.push_back(e);
    }
    // stable sort keeps input order among equal pairs so "last wins" holds
    std::stable_sort(kept.begin(), kept.end(), [](const TrustEdge& a, const TrustEdge& b) {
      return a.truster != b.truster ? a.truster < b.truster : a.trustee < b.trustee;
    });
    std::vector<TrustEdge> unique;
    unique.reserve(kept.size());
    for (const auto& e : kept) {
      if (!unique.empty() && unique.back().truster == e.truster && unique.back().trustee == e.trustee) {
        unique.back().weight = e.weight;
        ++local.duplicates;
      } else {
        unique.push_back(e);
      }
    }
    TrustEdgeList list;
    list.num_users_ = num_users;
    list.edges_ = std::move(unique);
    list.build_adjacency();
    if (counts) *counts = local;
    return list;
  }

  std::size_t num_users() const noexcept { return num_users_; }
  std::size_t size() const noexcept { return edges_.size(); }
  bool empty() const noexcept { return edges_.empty(); }
  std::span<const TrustEdge> edges() const noexcept { return edges_; }

  /// Out-edges of u (T_u), sorted by trustee.
  std::span<const TrustEdge> trusted_by(UserIndex u) const {
    return {edges_.data() + out_offsets_[u], edges_.data() + out_offsets_[u + 1]};
  }
  /// Users trusting v (T_v+), sorted.
  std::span<const UserIndex> trusters_of(UserIndex v) const {
    return {in_users_.data() + in_offsets_[v], in_users_.data() + in_offsets_[v + 1]};
  }

  bool contains(UserIndex truster, UserIndex trustee) const {
    auto out = trusted_by(truster);
    return std::binary_search(out.begin(), out.end(), TrustEdge{truster, trustee, 0.0},
                              [](const TrustEdge& a, const TrustEdge& b) { return a.trustee < b.trustee; });
  }

  bool is_symmetric() const {
    return std::all_of(edges_.begin(), edges_.end(),
                       [&](const TrustEdge& e) { return contains(e.trustee, e.truster); });
  }

  /// Fraction of the N(N-1) possible directed edges present.
  double density() const {
    if (num_users_ < 2) return 0.0;
    return static_cast<double>(edges_.size()) /
           (static_cast<double>(num_users_) * static_cast<double>(num_users_ - 1));
  }

 private:
  void build_adjacency() {
    out_offsets_.assign(num_users_ + 1, 0);
    in_offsets_.assign(num_users_ + 1, 0);
    for (const auto& e : edges_) {
      ++out_offsets_[e.truster + 1];
      ++in_offsets_[e.trustee + 1];
    }
    std::partial_sum(out_offsets_.begin(), out_offsets_.end(), out_offsets_.begin());
    std::partial_sum(in_offsets_.begin(), in_offsets_.end(), in_offsets_.begin());
    in_users_.resize(edges_.size());
    std::vector<std::size_t> cur(in_offsets_.begin(), in_offsets_.end() - 1);
    for (const auto& e : edges_) in_users_[cur[e.trustee]++] = e.truster;  // trusters ascend
  }

  std::size_t num_users_ = 0;
  std::vector<TrustEdge> edges_;
  std::vector<std::size_t> out_offsets_{0};
  std::vector<std::size_t> in_offsets_{0};
  std::vector<UserIndex> in_users_;
};

struct ParsedTrust {
  TrustEdgeList edges;
  std::size_t lines = 0;  // directed edges read, before any dropping
  std::size_t dropped_unknown = 0;
  std::size_t dropped_self_loops = 0;
  std::size_t duplicates = 0;
};

/// Parses "truster trustee [weight]" lines; ids live in the rating file's
/// user namespace. Edges touching users absent from `ratings` are dropped.
inline ParsedTrust parse_trust(std::istream& in, const RatingDataset& ratings) {
  ParsedTrust out;
  std::vector<TrustEdge> edges;
  detail::for_each_data_line(in, [&](std::size_t line_no, const std::vector<std::string_view>& f) {
    if (f.size() < 2) throw ParseError("expected truster, trustee [, weight]", line_no);
    double weight = 1.0;
    if (f.size() >= 3) {
      auto w = detail::parse_real(f[2]);
      if (!w) throw ParseError("invalid trust weight '" + std::string(f[2]) + "'", line_no);
      weight = *w;
    }
    ++out.lines;
    auto truster = ratings.user_ids().find(f[0]);
    auto trustee = ratings.user_ids().find(f[1]);
    if (!truster || !trustee) {
      ++out.dropped_unknown;
      return;
    }
    edges.push_back({*truster, *trustee, weight});
  });
  TrustEdgeList::BuildCounts counts;
  out.edges = TrustEdgeList::build(ratings.num_users(), std::move(edges), &counts);
  out.dropped_self_loops = counts.self_loops;
  out.duplicates = counts.duplicates;
  return out;
}

/// Writes edges as "raw_truster raw_trustee weight" lines, so the output
/// reads back through parse_trust against the same rating file.
inline void write_trust(std::ostream& out, const TrustEdgeList& edges, const RatingDataset& ratings) {
  char buf[64];
  for (const auto& e : edges.edges()) {
    out << ratings.user_ids().raw(e.truster) << ' ' << ratings.user_ids().raw(e.trustee) << ' ';
    if (e.weight == std::floor(e.weight) && std::abs(e.weight) < 1e15) {
      std::snprintf(buf, sizeof buf, "%.1f", e.weight);
      out << buf;
    } else {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, e.weight);
      out << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

struct DatasetStats {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t ratings = 0;
  double density = 0.0;
  double mean_rating = 0.0;
};

inline DatasetStats dataset_stats(const RatingDataset& ds) {
  if (ds.empty()) throw DomainError("dataset_stats: empty dataset");
  DatasetStats s;
  s.num_users = ds.num_users();
  s.num_items = ds.num_items();
  s.ratings = ds.size();
  s.density = static_cast<double>(s.ratings) / (static_cast<double>(s.num_users) * static_cast<double>(s.num_items));
  s.mean_rating = ds.mean_rating();
  return s;
}

inline void write_stats_kv(std::ostream& out, const DatasetStats& s) {
  out << "users=" << s.num_users << '\n'
      << "items=" << s.num_items << '\n'
      << "ratings=" << s.ratings << '\n'
      << "density=" << s.density << '\n'
      << "mean=" << s.mean_rating << '\n';
}

inline void write_stats_csv(std::ostream& out, std::string_view dataset, const DatasetStats& s, bool header = true) {
  if (header) out << "dataset,N,M,ratings,density,mean\n";
  out << dataset << ',' << s.num_users << ',' << s.num_items << ',' << s.ratings << ',' << s.density << ','
      << s.mean_rating << '\n';
}

/// Per-record fold ids. Deterministic in (record order, k, seed); fold sizes
/// differ by at most one.
class FoldAssignment {
 public:
  FoldAssignment() = default;
  FoldAssignment(std::size_t k, std::uint64_t seed, std::vector<std::uint32_t> fold)
      : k_(k), seed_(seed), fold_(std::move(fold)) {}

  std::size_t k() const noexcept { return k_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::span<const std::uint32_t> assignment() const noexcept { return fold_; }

  std::vector<std::size_t> test_positions(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_.size(); ++i)
      if (fold_[i] == f) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> train_positions(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_.size(); ++i)
      if (fold_[i] != f) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> fold_sizes() const {
    std::vector<std::size_t> sizes(k_, 0);
    for (auto f : fold_) ++sizes[f];
    return sizes;
  }

  friend bool operator==(const FoldAssignment&, const FoldAssignment&) = default;

 private:
  std::size_t k_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::uint32_t> fold_;
};

inline FoldAssignment kfold_split(const RatingDataset& ds, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw DomainError("kfold_split: k must be >= 2");
  if (k > ds.size()) throw DomainError("kfold_split: k exceeds the number of records");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "kfold"));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::uint32_t> fold(ds.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) fold[order[pos]] = static_cast<std::uint32_t>(pos % k);
  return FoldAssignment(k, seed, std::move(fold));
}

}  // namespace helltrust
