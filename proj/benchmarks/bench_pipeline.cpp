#include <benchmark/benchmark.h>

#include <Eigen/Geometry>

#include "curvreg/evaluation.hpp"
#include "curvreg/pipeline.hpp"

namespace {

using namespace curvreg;

struct ScanPair {
  PointCloud model;
  PointCloud data;
  PipelineConfig cfg;
};

ScanPair make_pair() {
  TerrainSpec spec = random_terrain(7);
  spec.range_noise_sigma = 0.02;
  const Terrain terrain(spec);

  ScanPair out;
  out.cfg.projection.el_start = -ProjectionModel::kPi / 4;
  out.cfg.projection.el_end = ProjectionModel::kPi / 12;

  RigidTransform a;
  a.translation = Point3(-2.0, -1.0, terrain.height(-2.0, -1.0) + 1.7);
  RigidTransform b;
  b.rotation = Eigen::AngleAxisd(0.2, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  b.translation = Point3(-0.5, -0.4, terrain.height(-0.5, -0.4) + 1.7);

  out.model = synth_scan(terrain, a, out.cfg.projection, 0);
  out.data = synth_scan(terrain, b, out.cfg.projection, 1);
  return out;
}

void bench_register_pair(benchmark::State& state) {
  const ScanPair pair = make_pair();
  for (auto _ : state) {
    RegistrationResult result = register_pair(pair.model, pair.data, pair.cfg);
    benchmark::DoNotOptimize(result.inlier_count);
  }
}

void bench_extract_features(benchmark::State& state) {
  const ScanPair pair = make_pair();
  for (auto _ : state) {
    ScanFeatures scan = extract_scan_features(pair.model, pair.cfg);
    benchmark::DoNotOptimize(scan.features.keypoints.data());
  }
}

BENCHMARK(bench_register_pair)->Unit(benchmark::kMillisecond)->Iterations(3);
BENCHMARK(bench_extract_features)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace
