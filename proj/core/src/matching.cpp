#include "curvreg/matching.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <tuple>

#include <Eigen/Geometry>

#include "curvreg/error.hpp"
#include "curvreg/io_util.hpp"
#include "curvreg/rng.hpp"
#include "curvreg/threading.hpp"

namespace curvreg {

namespace {

struct Best {
  double distance = std::numeric_limits<double>::infinity();
  int index = std::numeric_limits<int>::max();

  void offer(double d, int i) {
    if (d < distance || (d == distance && i < index)) {
      distance = d;
      index = i;
    }
  }
};

// Exact kd-tree over descriptors. Split axis = widest spread, split value =
// median. The search visits a subtree whenever its slab distance is <= the
// current best, never pruning on equality, so distances and the lowest-index
// tie-break agree with the brute-force scan bit for bit.
class KdTree {
public:
  explicit KdTree(const std::vector<Descriptor>& points) : points_(points) {
    indices_.resize(points.size());
    std::iota(indices_.begin(), indices_.end(), 0);
    nodes_.reserve(points.size() * 2);
    root_ = build(0, points.size());
  }

  Best nearest(const Descriptor& query) const {
    Best best;
    search(root_, query, best);
    return best;
  }

private:
  struct Node {
    int axis = -1;          // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
    size_t begin = 0, end = 0;  // leaf payload range in indices_
  };

  static constexpr size_t kLeafSize = 8;

  int build(size_t begin, size_t end) {
    Node node;
    if (end - begin <= kLeafSize) {
      node.begin = begin;
      node.end = end;
      // Leaf scan order = ascending index so equal distances resolve low.
      std::sort(indices_.begin() + static_cast<long>(begin),
                indices_.begin() + static_cast<long>(end));
      nodes_.push_back(node);
      return static_cast<int>(nodes_.size()) - 1;
    }

    int axis = 0;
    double best_spread = -1.0;
    for (int d = 0; d < 128; ++d) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (size_t i = begin; i < end; ++i) {
        const double v = points_[indices_[i]][static_cast<size_t>(d)];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        axis = d;
      }
    }

    const size_t mid = begin + (end - begin) / 2;
    std::nth_element(indices_.begin() + static_cast<long>(begin),
                     indices_.begin() + static_cast<long>(mid),
                     indices_.begin() + static_cast<long>(end),
                     [&](int a, int b) {
                       const double va = points_[a][static_cast<size_t>(axis)];
                       const double vb = points_[b][static_cast<size_t>(axis)];
                       return va < vb || (va == vb && a < b);
                     });
    node.axis = axis;
    node.split = points_[indices_[mid]][static_cast<size_t>(axis)];
    nodes_.push_back(node);
    const int self = static_cast<int>(nodes_.size()) - 1;
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[static_cast<size_t>(self)].left = left;
    nodes_[static_cast<size_t>(self)].right = right;
    return self;
  }

  void search(int node_id, const Descriptor& query, Best& best) const {
    const Node& node = nodes_[static_cast<size_t>(node_id)];
    if (node.axis < 0) {
      for (size_t i = node.begin; i < node.end; ++i) {
        const int idx = indices_[i];
        best.offer(descriptor_distance(query, points_[static_cast<size_t>(idx)]), idx);
      }
      return;
    }
    const double gap = query[static_cast<size_t>(node.axis)] - node.split;
    const int near = gap < 0.0 ? node.left : node.right;
    const int far = gap < 0.0 ? node.right : node.left;
    search(near, query, best);
    if (std::abs(gap) <= best.distance) search(far, query, best);
  }

  const std::vector<Descriptor>& points_;
  std::vector<int> indices_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

std::vector<int> nearest_all(const std::vector<Descriptor>& queries,
                             const std::vector<Descriptor>& targets,
                             bool use_kdtree) {
  std::vector<int> nearest(queries.size(), -1);
  if (use_kdtree) {
    const KdTree tree(targets);
    parallel_for(0, queries.size(), [&](size_t q) {
      nearest[q] = tree.nearest(queries[q]).index;
    });
  } else {
    parallel_for(0, queries.size(), [&](size_t q) {
      Best best;
      for (size_t t = 0; t < targets.size(); ++t)
        best.offer(descriptor_distance(queries[q], targets[t]), static_cast<int>(t));
      nearest[q] = best.index;
    });
  }
  return nearest;
}

}  // namespace

std::vector<Match> match_nn(const std::vector<Descriptor>& model_desc,
                            const std::vector<Descriptor>& data_desc,
                            const MatchConfig& cfg) {
  if (model_desc.empty() || data_desc.empty())
    raise(ErrorCode::NoFeatures, "descriptor matching needs non-empty sets");

  const std::vector<int> model_of_data = nearest_all(data_desc, model_desc, cfg.use_kdtree);
  std::vector<int> data_of_model;
  if (cfg.mutual)
    data_of_model = nearest_all(model_desc, data_desc, cfg.use_kdtree);

  std::vector<Match> matches;
  for (size_t d = 0; d < data_desc.size(); ++d) {
    const int m = model_of_data[d];
    if (cfg.mutual && data_of_model[static_cast<size_t>(m)] != static_cast<int>(d))
      continue;
    matches.push_back({m, static_cast<int>(d),
                       descriptor_distance(model_desc[static_cast<size_t>(m)],
                                           data_desc[d])});
  }
  return matches;
}

void RansacConfig::validate() const {
  if (!(inlier_threshold > 0.0))
    raise(ErrorCode::InvalidConfig, "RANSAC inlier threshold must be positive");
  if (max_iterations < 1)
    raise(ErrorCode::InvalidConfig, "RANSAC needs at least one iteration");
  if (min_inliers < 3)
    raise(ErrorCode::InvalidConfig, "RANSAC min_inliers must be >= 3");
}

RansacResult ransac_filter(const std::vector<Match>& matches,
                           const std::vector<Point3>& model_points,
                           const std::vector<Point3>& data_points,
                           const RansacConfig& cfg) {
  cfg.validate();
  const size_t n = matches.size();
  if (n < 3)
    raise(ErrorCode::InsufficientMatches,
          "RANSAC needs >= 3 matches, got " + std::to_string(n));
  for (const Match& m : matches) {
    if (m.model_index < 0 || static_cast<size_t>(m.model_index) >= model_points.size() ||
        m.data_index < 0 || static_cast<size_t>(m.data_index) >= data_points.size())
      raise(ErrorCode::InvalidConfig, "match references a keypoint out of range");
  }

  // Sampling runs over a canonical order so the result is invariant to
  // permutations of the match list.
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return std::tie(matches[a].model_index, matches[a].data_index, a) <
           std::tie(matches[b].model_index, matches[b].data_index, b);
  });
  std::vector<Point3> mp(n), dp(n);
  for (size_t i = 0; i < n; ++i) {
    mp[i] = model_points[static_cast<size_t>(matches[order[i]].model_index)];
    dp[i] = data_points[static_cast<size_t>(matches[order[i]].data_index)];
  }

  SplitMix64 rng(cfg.rng_seed);
  struct {
    long count = -1;
    double rms = std::numeric_limits<double>::infinity();
    RigidTransform transform;
  } best;

  for (int it = 0; it < cfg.max_iterations; ++it) {
    const size_t a = rng.bounded(n);
    size_t b = rng.bounded(n);
    while (b == a) b = rng.bounded(n);
    size_t c = rng.bounded(n);
    while (c == a || c == b) c = rng.bounded(n);

    // Degenerate-sample guard: nearly collinear model triples produce
    // unstable hypotheses; skip them (RNG consumption stays threshold-free).
    const Point3 e1 = mp[b] - mp[a];
    const Point3 e2 = mp[c] - mp[a];
    if (e1.cross(e2).norm() <= 1e-6 * e1.norm() * e2.norm()) continue;

    CorrespondenceSet sample;
    sample.pairs = {{mp[a], dp[a]}, {mp[b], dp[b]}, {mp[c], dp[c]}};
    RigidTransform hypothesis;
    try {
      hypothesis = estimate_rigid_svd(sample);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DegenerateCorrespondences) continue;
      throw;
    }

    long count = 0;
    double sum_sq = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double r = (mp[i] - apply_transform(hypothesis, dp[i])).norm();
      if (r <= cfg.inlier_threshold) {
        ++count;
        sum_sq += r * r;
      }
    }
    if (count == 0) continue;
    const double rms = std::sqrt(sum_sq / static_cast<double>(count));
    if (count > best.count || (count == best.count && rms < best.rms)) {
      best.count = count;
      best.rms = rms;
      best.transform = hypothesis;
    }
  }

  if (best.count < cfg.min_inliers)
    raise(ErrorCode::ConsensusFailure,
          "best consensus has " + std::to_string(std::max(best.count, 0l)) +
              " inliers, needs " + std::to_string(cfg.min_inliers));

  // Collect the winning hypothesis's inlier set (canonical order), flag the
  // original match list, and re-estimate on all inliers.
  RansacResult result;
  result.inlier_flags.assign(n, 0);
  for (size_t i = 0; i < n; ++i) {
    const double r = (mp[i] - apply_transform(best.transform, dp[i])).norm();
    if (r <= cfg.inlier_threshold) {
      result.inliers.pairs.push_back({mp[i], dp[i]});
      result.inlier_flags[order[i]] = 1;
    }
  }
  result.transform = estimate_rigid_svd(result.inliers);

  double sum_sq = 0.0;
  for (const Correspondence& c : result.inliers.pairs) {
    const double r = (c.model - apply_transform(result.transform, c.data)).norm();
    sum_sq += r * r;
  }
  result.residual_rms = std::sqrt(sum_sq / static_cast<double>(result.inliers.size()));
  return result;
}

void write_matches_csv(const std::vector<Match>& matches,
                       const std::vector<char>& inlier_flags,
                       const std::string& path) {
  if (!inlier_flags.empty() && inlier_flags.size() != matches.size())
    raise(ErrorCode::LengthMismatch, "inlier flags do not align with matches");
  atomic_write(path, [&](std::ostream& out) {
    out << "model_idx,data_idx,desc_dist,inlier\n";
    char line[128];
    for (size_t i = 0; i < matches.size(); ++i) {
      const int flag = inlier_flags.empty() ? 0 : inlier_flags[i];
      std::snprintf(line, sizeof(line), "%d,%d,%.17g,%d\n", matches[i].model_index,
                    matches[i].data_index, matches[i].distance, flag);
      out << line;
    }
  });
}

}  // namespace curvreg
