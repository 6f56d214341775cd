#pragma once

#include <Eigen/Geometry>
#include <cmath>

#include "curvreg/geometry.hpp"
#include "curvreg/grid.hpp"
#include "curvreg/rng.hpp"

namespace testutil {

inline Eigen::Matrix3d random_rotation(curvreg::SplitMix64& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

inline Eigen::Matrix3d rotation_about(const Eigen::Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

inline curvreg::RigidTransform random_transform(curvreg::SplitMix64& rng,
                                                double translation_max = 5.0) {
  curvreg::RigidTransform t;
  t.rotation = random_rotation(rng);
  t.translation = Eigen::Vector3d(rng.uniform(-translation_max, translation_max),
                                  rng.uniform(-translation_max, translation_max),
                                  rng.uniform(-translation_max, translation_max));
  return t;
}

inline curvreg::Point3 random_point(curvreg::SplitMix64& rng, double lo, double hi) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

inline curvreg::Grid<double> random_image(curvreg::SplitMix64& rng, int width, int height) {
  curvreg::Grid<double> img(width, height);
  for (auto& px : img) px = rng.uniform();
  return img;
}

inline double image_energy(const curvreg::Grid<double>& img) {
  double e = 0.0;
  for (double px : img) e += px * px;
  return e;
}

}  // namespace testutil
