#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "curvreg/feature.hpp"
#include "curvreg/geometry.hpp"

namespace curvreg {

struct Match {
  int model_index = 0;
  int data_index = 0;
  double distance = 0.0;  // descriptor L2 distance
};

struct MatchConfig {
  bool mutual = true;      // keep only matches that are nearest in both directions
  bool use_kdtree = false; // exact kd-tree backend; result equals brute force
};

/// Nearest model descriptor for every data descriptor, ties resolved to the
/// lowest model index. With mutual filtering only reciprocal nearest pairs
/// survive. Output ordered by ascending data index.
/// Throws NoFeatures when either list is empty.
std::vector<Match> match_nn(const std::vector<Descriptor>& model_desc,
                            const std::vector<Descriptor>& data_desc,
                            const MatchConfig& cfg = {});

struct RansacConfig {
  double inlier_threshold = 0.5;  // meters
  int max_iterations = 1000;
  int min_inliers = 5;
  uint64_t rng_seed = 0;

  /// Throws InvalidConfig unless threshold > 0, max_iterations >= 1,
  /// min_inliers >= 3.
  void validate() const;
};

struct RansacResult {
  RigidTransform transform;      // data -> model, re-estimated on all inliers
  CorrespondenceSet inliers;     // ordered by (model_index, data_index)
  std::vector<char> inlier_flags;  // aligned with the input match list
  double residual_rms = 0.0;     // meters, inliers under the final transform
};

/// Consensus filtering of 3D correspondences: repeatedly samples 3 matches,
/// estimates a rigid transform, and counts matches whose transformed data
/// point lies within inlier_threshold of the model point. Ties between
/// hypotheses break on lower inlier RMS, then earlier iteration. Sampling is
/// seeded and runs over the match list sorted by (model_index, data_index),
/// so the result does not depend on input order.
///
/// Throws InsufficientMatches (< 3 matches) and ConsensusFailure (winner has
/// fewer than min_inliers inliers).
RansacResult ransac_filter(const std::vector<Match>& matches,
                           const std::vector<Point3>& model_points,
                           const std::vector<Point3>& data_points,
                           const RansacConfig& cfg);

/// CSV dump `model_idx,data_idx,desc_dist,inlier` with inlier as 0/1. The
/// flags vector must align with the match list (empty = all zeros).
void write_matches_csv(const std::vector<Match>& matches,
                       const std::vector<char>& inlier_flags,
                       const std::string& path);

}  // namespace curvreg
