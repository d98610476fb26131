#pragma once

// Implicit trust from the bipartite rating graph.
//
// Each user x is summarised by L_x, the histogram of the degrees of the items
// x rated. Two users are linked when the Hellinger distance between their
// normalized histograms falls at or below a global threshold T. T is chosen
// so that, under a normal model of the pairwise distance distribution, the
// probability of a link equals alpha = E[deg] / M.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "helltrust/dataset.hpp"
#include "helltrust/error.hpp"
#include "helltrust/normal.hpp"
#include "helltrust/random.hpp"

namespace helltrust {

/// counts[i - 1] = l_i, the number of the user's items with degree i.
/// Trailing zero bins are trimmed; max_degree is the graph-wide Delta.
struct DegreeProfile {
  UserIndex user = 0;
  std::vector<std::uint32_t> counts;
  std::uint32_t max_degree = 0;

  bool usable() const noexcept { return !counts.empty(); }
  std::uint64_t total() const noexcept {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
};

/// One profile per user (users without ratings get an empty, unusable
/// profile). Item degrees come from `ds` alone, so pass the training split.
inline std::vector<DegreeProfile> build_degree_profiles(const RatingDataset& ds) {
  std::vector<std::uint32_t> item_degree(ds.num_items(), 0);
  for (const auto& r : ds.records()) ++item_degree[r.item];
  const std::uint32_t delta = item_degree.empty() ? 0 : *std::max_element(item_degree.begin(), item_degree.end());

  std::vector<DegreeProfile> profiles(ds.num_users());
  for (UserIndex u = 0; u < ds.num_users(); ++u) {
    auto& p = profiles[u];
    p.user = u;
    p.max_degree = delta;
    std::uint32_t top = 0;
    for (const auto& e : ds.user_items(u)) top = std::max(top, item_degree[e.item]);
    p.counts.assign(top, 0);
    for (const auto& e : ds.user_items(u)) ++p.counts[item_degree[e.item] - 1];
  }
  return profiles;
}

/// d(x, y) = sqrt(sum_i (sqrt(p_i) - sqrt(q_i))^2) over normalized profiles;
/// lies in [0, sqrt(2)].
inline double hellinger_distance(const DegreeProfile& x, const DegreeProfile& y) {
  if (!x.usable() || !y.usable()) throw DomainError("hellinger_distance: empty profile (user has no ratings)");
  const auto sx = static_cast<double>(x.total());
  const auto sy = static_cast<double>(y.total());
  const std::size_t bins = std::max(x.counts.size(), y.counts.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < bins; ++i) {
    const double lx = i < x.counts.size() ? x.counts[i] : 0.0;
    const double ly = i < y.counts.size() ? y.counts[i] : 0.0;
    if (lx == 0.0 && ly == 0.0) continue;
    const double diff = std::sqrt(lx / sx) - std::sqrt(ly / sy);
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

/// Usable profiles packed as sparse (bin, sqrt(p_bin)) rows for the pair scan.
/// distance(a, b) is bitwise equal to hellinger_distance on the originals.
class ProfileIndex {
 public:
  explicit ProfileIndex(const std::vector<DegreeProfile>& profiles) {
    offsets_.push_back(0);
    for (const auto& p : profiles) {
      if (!p.usable()) continue;
      users_.push_back(p.user);
      const auto total = static_cast<double>(p.total());
      for (std::size_t i = 0; i < p.counts.size(); ++i) {
        if (p.counts[i] == 0) continue;
        bins_.push_back(static_cast<std::uint32_t>(i));
        roots_.push_back(std::sqrt(p.counts[i] / total));
      }
      offsets_.push_back(bins_.size());
    }
  }

  std::size_t size() const noexcept { return users_.size(); }
  UserIndex user(std::size_t row) const { return users_[row]; }

  double distance(std::size_t a, std::size_t b) const {
    std::size_t i = offsets_[a], ie = offsets_[a + 1];
    std::size_t j = offsets_[b], je = offsets_[b + 1];
    double acc = 0.0;
    while (i < ie && j < je) {
      double diff;
      if (bins_[i] == bins_[j]) {
        diff = roots_[i++] - roots_[j++];
      } else if (bins_[i] < bins_[j]) {
        diff = roots_[i++];
      } else {
        diff = -roots_[j++];
      }
      acc += diff * diff;
    }
    for (; i < ie; ++i) acc += roots_[i] * roots_[i];
    for (; j < je; ++j) acc += roots_[j] * roots_[j];
    return std::sqrt(acc);
  }

 private:
  std::vector<UserIndex> users_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> bins_;
  std::vector<double> roots_;
};

inline std::size_t default_sample_size(std::size_t usable_users) {
  const std::size_t pairs = usable_users * (usable_users - 1) / 2;
  return std::min<std::size_t>(pairs, 1'000'000);
}

/// Distances of n uniformly drawn unordered pairs of distinct usable users,
/// sampled with replacement across the whole network.
inline std::vector<double> sample_distances(const ProfileIndex& index, std::size_t n, std::uint64_t seed) {
  if (index.size() < 2) throw DegenerateError("sample_distances: need at least 2 users with ratings");
  if (n < 2) throw DomainError("sample_distances: n must be >= 2");
  Rng rng(derive_seed(seed, "sample_distances"));
  const std::uint64_t users = index.size();
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto a = rng.below(users);
    auto b = rng.below(users - 1);
    if (b >= a) ++b;
    out.push_back(index.distance(a, b));
  }
  return out;
}

inline std::vector<double> sample_distances(const std::vector<DegreeProfile>& profiles, std::size_t n,
                                            std::uint64_t seed) {
  return sample_distances(ProfileIndex(profiles), n, seed);
}

struct ThresholdSpec {
  double expected_degree = 0.0;
  std::size_t other_side_count = 0;  // M
  double alpha = 0.0;
  double threshold = 0.0;  // T
};

/// alpha = E[deg] / M and T = mu + sigma * Phi^{-1}(alpha).
inline ThresholdSpec compute_threshold(const NormalFit& fit, double expected_degree, std::size_t other_side_count) {
  if (other_side_count == 0) throw DegenerateError("compute_threshold: M must be positive");
  ThresholdSpec spec;
  spec.expected_degree = expected_degree;
  spec.other_side_count = other_side_count;
  spec.alpha = expected_degree / static_cast<double>(other_side_count);
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0))
    throw DegenerateError("compute_threshold: alpha = E[deg]/M = " + std::to_string(spec.alpha) +
                          " lies outside (0, 1)");
  if (fit.degenerate || !(fit.sigma_hat > 0.0))
    throw DegenerateError("compute_threshold: distance sample has zero variance");
  spec.threshold = fit.mu_hat + fit.sigma_hat * inverse_normal_cdf(spec.alpha);
  return spec;
}

/// Unordered usable pairs (row indices into `index`, a < b) with distance <= T.
/// Rows are split into `jobs` contiguous ranges of roughly equal pair count;
/// concatenating the per-range results keeps (a, b) order.
inline std::vector<std::pair<std::size_t, std::size_t>> scan_close_pairs(const ProfileIndex& index, double threshold,
                                                                         unsigned jobs = 1) {
  const std::size_t n = index.size();
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  std::vector<std::size_t> cuts{0};
  const double total = 0.5 * static_cast<double>(n) * static_cast<double>(n > 0 ? n - 1 : 0);
  double acc = 0.0;
  for (std::size_t a = 0; a < n && cuts.size() < jobs; ++a) {
    acc += static_cast<double>(n - 1 - a);
    if (acc >= total * static_cast<double>(cuts.size()) / jobs) cuts.push_back(a + 1);
  }
  cuts.push_back(n);

  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> parts(cuts.size() - 1);
  auto work = [&](std::size_t part) {
    constexpr std::size_t block = 64;
    auto& out = parts[part];
    const std::size_t lo = cuts[part], hi = cuts[part + 1];
    // Tiles of (rows x cols) keep both sparse rows hot in cache.
    for (std::size_t a0 = lo; a0 < hi; a0 += block) {
      const std::size_t a1 = std::min(hi, a0 + block);
      for (std::size_t a = a0; a < a1; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
          if (index.distance(a, b) <= threshold) out.emplace_back(a, b);
    }
  };
  if (parts.size() == 1) {
    work(0);
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t p = 0; p < parts.size(); ++p) threads.emplace_back(work, p);
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (auto& part : parts) pairs.insert(pairs.end(), part.begin(), part.end());
  return pairs;
}

/// Symmetric edge list: both (x, y, 1.0) and (y, x, 1.0) for every usable
/// pair with d(x, y) <= T.
inline TrustEdgeList extract_trust_edges(const std::vector<DegreeProfile>& profiles, double threshold,
                                         unsigned jobs = 1) {
  const ProfileIndex index(profiles);
  std::vector<TrustEdge> edges;
  for (auto [a, b] : scan_close_pairs(index, threshold, jobs)) {
    edges.push_back({index.user(a), index.user(b), 1.0});
    edges.push_back({index.user(b), index.user(a), 1.0});
  }
  return TrustEdgeList::build(profiles.size(), std::move(edges));
}

struct ExtractionParams {
  double expected_degree = 10.0;
  std::size_t sample_size = 0;  // 0: min(all pairs, 10^6)
  std::uint64_t seed = 1;
  unsigned jobs = 1;
};

struct QuantileCheck {
  double probability;
  double empirical;
  double fitted;
};

struct ExtractionResult {
  NormalFit fit;
  ThresholdSpec threshold;
  TrustEdgeList edges;
  std::size_t num_users = 0;
  std::size_t usable_users = 0;
  std::vector<QuantileCheck> quantiles;

  std::size_t undirected_pairs() const noexcept { return edges.size() / 2; }
  double mean_degree() const noexcept {
    return num_users ? 2.0 * static_cast<double>(undirected_pairs()) / static_cast<double>(num_users) : 0.0;
  }
};

/// profiles -> sampled distances -> normal fit -> threshold -> edges.
inline ExtractionResult extract_implicit_trust(const RatingDataset& train, const ExtractionParams& params) {
  const auto profiles = build_degree_profiles(train);
  const ProfileIndex index(profiles);
  if (index.size() < 2) throw DegenerateError("trust extraction: fewer than 2 users with ratings");
  const std::size_t n = params.sample_size ? params.sample_size : default_sample_size(index.size());
  auto samples = sample_distances(index, std::max<std::size_t>(n, 2), params.seed);

  ExtractionResult result;
  result.fit = fit_normal_mle(samples);
  result.num_users = train.num_users();
  result.usable_users = index.size();
  result.threshold = compute_threshold(result.fit, params.expected_degree, train.num_items());

  std::sort(samples.begin(), samples.end());
  for (double prob : {0.001, 0.01, 0.1, 0.5, 0.9}) {
    const auto pos = static_cast<std::size_t>(prob * static_cast<double>(samples.size() - 1));
    result.quantiles.push_back(
        {prob, samples[pos], result.fit.mu_hat + result.fit.sigma_hat * inverse_normal_cdf(prob)});
  }

  std::vector<TrustEdge> edges;
  for (auto [a, b] : scan_close_pairs(index, result.threshold.threshold, params.jobs)) {
    edges.push_back({index.user(a), index.user(b), 1.0});
    edges.push_back({index.user(b), index.user(a), 1.0});
  }
  result.edges = TrustEdgeList::build(train.num_users(), std::move(edges));
  return result;
}

inline std::string diagnostics_line(const ExtractionResult& r) {
  std::ostringstream out;
  out.precision(6);
  out << "mu=" << r.fit.mu_hat << " sigma=" << r.fit.sigma_hat << " alpha=" << r.threshold.alpha
      << " T=" << r.threshold.threshold << " edges=" << r.edges.size() << " mean_degree=" << r.mean_degree();
  return out.str();
}

}  // namespace helltrust
