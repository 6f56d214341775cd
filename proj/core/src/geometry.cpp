#include "curvreg/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "curvreg/error.hpp"

namespace curvreg {

Point3 apply_transform(const RigidTransform& t, const Point3& p) {
  return t.rotation * p + t.translation;
}

PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud) {
  PointCloud out;
  out.points.reserve(cloud.points.size());
  for (const Point3& p : cloud.points) out.points.push_back(apply_transform(t, p));
  return out;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  Eigen::Matrix3d gram = out.rotation.transpose() * out.rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-12) {
    out.rotation = orthonormalize(out.rotation);
  }
  return out;
}

RigidTransform inverse(const RigidTransform& t) {
  RigidTransform out;
  out.rotation = t.rotation.transpose();
  out.translation = -(out.rotation * t.translation);
  return out;
}

bool is_rotation(const Eigen::Matrix3d& r, double tol) {
  Eigen::Matrix3d gram = r.transpose() * r;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

double rotation_angle(const Eigen::Matrix3d& r) {
  // atan2 of (sin, cos) recovered from the skew part and the trace. Unlike
  // acos((tr-1)/2), this keeps full precision for small angles, where acos
  // bottoms out near sqrt(machine epsilon) ~ 2e-8.
  const double sx = r(2, 1) - r(1, 2);
  const double sy = r(0, 2) - r(2, 0);
  const double sz = r(1, 0) - r(0, 1);
  const double s = 0.5 * std::sqrt(sx * sx + sy * sy + sz * sz);
  const double c = 0.5 * (r.trace() - 1.0);
  return std::atan2(s, c);
}

double rotation_distance(const Eigen::Matrix3d& ra, const Eigen::Matrix3d& rb) {
  return rotation_angle(ra * rb.transpose());
}

RigidTransform estimate_rigid_svd(const CorrespondenceSet& correspondences) {
  const auto& pairs = correspondences.pairs;
  const size_t n = pairs.size();
  if (n < 3) {
    raise(ErrorCode::DegenerateCorrespondences,
          "need at least 3 correspondence pairs, got " + std::to_string(n));
  }

  Eigen::Vector3d model_centroid = Eigen::Vector3d::Zero();
  Eigen::Vector3d data_centroid = Eigen::Vector3d::Zero();
  for (const auto& c : pairs) {
    model_centroid += c.model;
    data_centroid += c.data;
  }
  model_centroid /= static_cast<double>(n);
  data_centroid /= static_cast<double>(n);

  // Cross-covariance of centered pairs, plus the centered data covariance used
  // for the rank check.
  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d data_cov = Eigen::Matrix3d::Zero();
  for (const auto& c : pairs) {
    Eigen::Vector3d dm = c.model - model_centroid;
    Eigen::Vector3d dd = c.data - data_centroid;
    cross += dd * dm.transpose();
    data_cov += dd * dd.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(data_cov);
  const Eigen::Vector3d evals = eig.eigenvalues();  // ascending
  if (!(evals[2] > 0.0) || evals[1] <= evals[2] * 1e-18) {
    raise(ErrorCode::DegenerateCorrespondences,
          "centered data covariance has rank < 2 (collinear points)");
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  // cross = sum dd * dm^T, so R maps data into the model frame via V * U^T.
  Eigen::Matrix3d r = v * u.transpose();
  if (r.determinant() < 0.0) {
    v.col(2) *= -1.0;
    r = v * u.transpose();
  }

  RigidTransform out;
  out.rotation = r;
  out.translation = model_centroid - r * data_centroid;
  return out;
}

}  // namespace curvreg
