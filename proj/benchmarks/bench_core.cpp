#include <benchmark/benchmark.h>

#include <vector>

#include "demostack/align.hpp"
#include "demostack/dataqa.hpp"
#include "demostack/guards.hpp"
#include "demostack/matrix.hpp"
#include "demostack/rng.hpp"
#include "demostack/sampler.hpp"
#include "demostack/unify.hpp"

using namespace demostack;

namespace {

Matrix random_states(std::size_t T, std::size_t D, std::uint64_t seed) {
    CounterRng rng(CounterRng::derive_key(seed, 0x62656e63ULL));
    Matrix m(T, D);
    for (double& v : m.data) v = rng.next_normal();
    return m;
}

Image random_frame(int w, int h, std::uint64_t seed) {
    CounterRng rng(CounterRng::derive_key(seed, 0x696d67ULL));
    Image img(w, h);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.next_below(256));
    return img;
}

void BM_TrembleScore(benchmark::State& state) {
    const Matrix states = random_states(static_cast<std::size_t>(state.range(0)), 14, 1);
    for (auto _ : state)
        benchmark::DoNotOptimize(tremble_score(states, 2.0));
}
BENCHMARK(BM_TrembleScore)->Arg(100)->Arg(1000);

void BM_SharpnessScore(benchmark::State& state) {
    std::vector<Image> frames;
    for (int t = 0; t < 16; ++t)
        frames.push_back(random_frame(static_cast<int>(state.range(0)),
                                      static_cast<int>(state.range(0)), t));
    for (auto _ : state)
        benchmark::DoNotOptimize(sharpness_score(frames, 16));
}
BENCHMARK(BM_SharpnessScore)->Arg(64)->Arg(128);

void BM_MeanFlow(benchmark::State& state) {
    const Image base = random_frame(128, 128, 3);
    std::vector<Image> frames;
    for (int t = 0; t < 8; ++t) {
        Image shifted(128, 128);
        for (int y = 0; y < 128; ++y)
            for (int x = 0; x < 128; ++x)
                shifted.at(x, y) = base.at((x + 2 * t) % 128, y);
        frames.push_back(shifted);
    }
    for (auto _ : state)
        benchmark::DoNotOptimize(mean_flow_magnitude(frames));
}
BENCHMARK(BM_MeanFlow);

void BM_ResampleTrajectory(benchmark::State& state) {
    const Matrix traj = random_states(static_cast<std::size_t>(state.range(0)), 14, 5);
    for (auto _ : state)
        benchmark::DoNotOptimize(resample_trajectory(traj, 0.5));
}
BENCHMARK(BM_ResampleTrajectory)->Arg(100)->Arg(1000);

void BM_FitGmm(benchmark::State& state) {
    const Matrix states = random_states(500, 8, 7);
    for (auto _ : state)
        benchmark::DoNotOptimize(fit_gmm(states, static_cast<std::size_t>(state.range(0)), 0));
}
BENCHMARK(BM_FitGmm)->Arg(1)->Arg(4);

void BM_DensityGrad(benchmark::State& state) {
    const Matrix states = random_states(500, 8, 9);
    const GmmDensityModel model = fit_gmm(states, 4, 0).model;
    std::vector<double> s(8, 0.2);
    for (auto _ : state)
        benchmark::DoNotOptimize(gmm_density_grad(model, s));
}
BENCHMARK(BM_DensityGrad);

void BM_SamplePlan(benchmark::State& state) {
    SamplerSchedule sched;
    for (int i = 0; i < 12; ++i) {
        sched.dataset_ids.push_back("ds" + std::to_string(i));
        sched.target_weights.push_back(0.02 + 0.01 * i);
    }
    sched.ramp_steps = 1000;
    for (auto _ : state)
        benchmark::DoNotOptimize(sample_plan(sched, 500, 10000));
}
BENCHMARK(BM_SamplePlan);

void BM_MapRoundTrip(benchmark::State& state) {
    std::vector<DimMapping> dims;
    for (int i = 0; i < 14; ++i) dims.push_back({i, i, 1.5, 0.25});
    EmbodimentDescriptor desc("bench", std::move(dims), PromptFields{});
    std::vector<double> native(14, 0.7);
    for (auto _ : state) {
        UnifiedAction u = map_to_unified(native, desc);
        benchmark::DoNotOptimize(map_from_unified(u, desc));
    }
}
BENCHMARK(BM_MapRoundTrip);

} // namespace

BENCHMARK_MAIN();
