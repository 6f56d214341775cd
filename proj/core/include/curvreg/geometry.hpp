#pragma once

#include <Eigen/Core>
#include <vector>

namespace curvreg {

using Point3 = Eigen::Vector3d;

struct PointCloud {
  std::vector<Point3> points;

  size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
};

/// Rigid-body transform in SE(3): p -> rotation * p + translation.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }
};

struct Correspondence {
  Point3 model;
  Point3 data;
};

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;

  size_t size() const noexcept { return pairs.size(); }
};

Point3 apply_transform(const RigidTransform& t, const Point3& p);
PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud);

/// Result applies b first, then a. Re-orthonormalizes if the rotation product
/// drifted from SO(3) by more than 1e-12.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

RigidTransform inverse(const RigidTransform& t);

/// True when R^T R = I within tol element-wise and det(R) = +1 within tol.
bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-9);

/// Nearest rotation in Frobenius norm (SVD projection, det corrected to +1).
Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m);

/// Geodesic angle of a rotation: arccos((trace - 1) / 2), argument clamped to
/// [-1, 1]. Returns a value in [0, pi].
double rotation_angle(const Eigen::Matrix3d& r);

/// Geodesic distance between two rotations: angle of Ra * Rb^T.
double rotation_distance(const Eigen::Matrix3d& ra, const Eigen::Matrix3d& rb);

/// Closed-form least-squares rigid alignment of correspondence pairs: returns
/// the transform minimizing sum ||model_i - (R * data_i + t)||^2. Reflections
/// are corrected so det(R) = +1.
///
/// Throws DegenerateCorrespondences when fewer than 3 pairs are given or the
/// centered data covariance has rank < 2 (collinear or coincident points).
RigidTransform estimate_rigid_svd(const CorrespondenceSet& correspondences);

}  // namespace curvreg
