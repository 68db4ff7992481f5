#include "drivemap/diffusion.hpp"
#include "drivemap/driver_map.hpp"
#include "drivemap/face_model.hpp"
#include "drivemap/metrics.hpp"
#include "drivemap/raster.hpp"

#include "harness.hpp"

#include <benchmark/benchmark.h>

using namespace drivemap;
using drivemap::testing::Gen;
using drivemap::testing::reference_assets;
using drivemap::testing::square_camera;

namespace {

struct Scene {
  PosedMesh mesh;
  Faces faces;
  Eigen::VectorXd beta;
  Eigen::VectorXd psi;
  PoseParams pose;
};

const Scene& scene() {
  static const Scene s = [] {
    const auto& a = reference_assets();
    Gen g(1);
    Scene sc;
    sc.beta = g.vector(a.n_beta(), 0.3);
    sc.psi = g.vector(a.n_psi(), 0.3);
    sc.pose = g.pose(0.3);
    sc.mesh = evaluate_mesh(a, sc.beta, sc.psi, sc.pose);
    sc.faces = render_faces(a);
    return sc;
  }();
  return s;
}

void BM_EvaluateMesh(benchmark::State& state) {
  const auto& a = reference_assets();
  const Scene& s = scene();
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_mesh(a, s.beta, s.psi, s.pose));
  }
}
BENCHMARK(BM_EvaluateMesh);

void BM_LinearBlendSkinning(benchmark::State& state) {
  const auto& a = reference_assets();
  const Scene& s = scene();
  const Vertices joints = regress_joints(a, a.template_vertices);
  const auto rs = joint_rotations(a, s.pose);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        linear_blend_skinning(a.template_vertices, joints, rs, a.blend_weights, a.joint_parents));
  }
}
BENCHMARK(BM_LinearBlendSkinning);

void BM_Rasterize(benchmark::State& state) {
  const Scene& s = scene();
  const Camera cam = square_camera(static_cast<int>(state.range(0)));
  const RasterOptions opts{static_cast<int>(state.range(1))};
  for (auto _ : state) {
    benchmark::DoNotOptimize(rasterize(s.mesh.vertices, s.faces, cam, opts));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_Rasterize)->Args({128, 1})->Args({512, 1})->Args({512, 4});

void BM_DriverMap(benchmark::State& state) {
  const auto& a = reference_assets();
  const EncodedTemplate enc = encode_template(a);
  const Scene& s = scene();
  const Camera cam = square_camera(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_driver_map(a, enc, s.beta, s.psi, s.pose, cam));
  }
}
BENCHMARK(BM_DriverMap)->Arg(128)->Arg(512);

void BM_HefFrame(benchmark::State& state) {
  const auto& a = reference_assets();
  const Scene& s = scene();
  FrameFit target{s.beta, s.psi, s.pose, square_camera(128)};
  ExpressionParams pred = expression_params(target);
  pred.expression *= 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(hef_frame(a, target, pred));
  }
}
BENCHMARK(BM_HefFrame);

void BM_DdimSample(benchmark::State& state) {
  const NoiseSchedule sched = temporal_shift(enforce_zero_terminal_snr(linear_schedule(kTrainTimesteps)), 15).schedule;
  const std::vector<double> z(4096, 0.5);
  const Denoiser zero = [](std::span<const double> z_t, int) { return std::vector<double>(z_t.size(), 0.0); };
  for (auto _ : state) {
    benchmark::DoNotOptimize(ddim_sample(z, zero, sched, 50));
  }
}
BENCHMARK(BM_DdimSample);

} // namespace

BENCHMARK_MAIN();
