// OpenMP kernels against the serial reference versions.
//
//   regvar_bench --benchmark_filter=Densify
//
// The thread-count argument only matters for the OpenMP variants; the
// reference ones ignore it and are listed once.

#include "regvar/loss.hpp"
#include "regvar/phantom.hpp"
#include "regvar/reference.hpp"
#include "regvar/transform.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

#include <thread>

using namespace regvar;

namespace {

constexpr int kSize = 112;

struct Scene {
    SyntheticPair pair;
    OneHotStack foh;
    OneHotStack moh;
    ControlGrid grid;
    DisplacementField field;

    Scene()
        : pair(make_pair(PhantomSpec{}, 4.0, 3)),
          foh(to_one_hot(pair.fixed_labels)),
          moh(to_one_hot(pair.moving_labels)),
          grid(random_smooth_deformation(kSize, kSize, 2.0, 9, 8.0)),
          field(densify(grid, kSize, kSize)) {}
};

const Scene& scene() {
    static const Scene s;
    return s;
}

void thread_args(benchmark::internal::Benchmark* b) {
    const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    for (int t = 1; t <= hw; t *= 2) b->Arg(t);
    if ((hw & (hw - 1)) != 0) b->Arg(hw);
}

void BM_DensifyOmp(benchmark::State& st) {
    omp_set_num_threads(static_cast<int>(st.range(0)));
    const Scene& s = scene();
    for (auto _ : st) benchmark::DoNotOptimize(densify(s.grid, kSize, kSize));
    st.SetItemsProcessed(st.iterations() * kSize * kSize);
}

void BM_DensifyRef(benchmark::State& st) {
    const Scene& s = scene();
    for (auto _ : st) benchmark::DoNotOptimize(reference::densify(s.grid, kSize, kSize));
    st.SetItemsProcessed(st.iterations() * kSize * kSize);
}

void BM_BackprojectOmp(benchmark::State& st) {
    omp_set_num_threads(static_cast<int>(st.range(0)));
    const Scene& s = scene();
    for (auto _ : st) benchmark::DoNotOptimize(backproject(s.field, s.grid));
    st.SetItemsProcessed(st.iterations() * kSize * kSize);
}

void BM_BackprojectRef(benchmark::State& st) {
    const Scene& s = scene();
    for (auto _ : st) benchmark::DoNotOptimize(reference::backproject(s.field, s.grid));
    st.SetItemsProcessed(st.iterations() * kSize * kSize);
}

void BM_NgfOmp(benchmark::State& st) {
    omp_set_num_threads(static_cast<int>(st.range(0)));
    const Scene& s = scene();
    for (auto _ : st) benchmark::DoNotOptimize(ngf_term(s.pair.fixed, s.pair.moving, s.field, 0.1));
    st.SetItemsProcessed(st.iterations() * kSize * kSize);
}

void BM_NgfRef(benchmark::State& st) {
    const Scene& s = scene();
    for (auto _ : st) benchmark::DoNotOptimize(reference::ngf_term(s.pair.fixed, s.pair.moving, s.field, 0.1));
    st.SetItemsProcessed(st.iterations() * kSize * kSize);
}

void BM_TotalLossOmp(benchmark::State& st) {
    omp_set_num_threads(static_cast<int>(st.range(0)));
    const Scene& s = scene();
    for (auto _ : st) {
        benchmark::DoNotOptimize(total_loss(s.pair.fixed, s.pair.moving, &s.foh, &s.moh, s.grid, LossWeights{}));
    }
    st.SetItemsProcessed(st.iterations() * kSize * kSize);
}

void BM_TotalLossRef(benchmark::State& st) {
    const Scene& s = scene();
    for (auto _ : st) {
        benchmark::DoNotOptimize(
            reference::total_loss(s.pair.fixed, s.pair.moving, &s.foh, &s.moh, s.grid, LossWeights{}));
    }
    st.SetItemsProcessed(st.iterations() * kSize * kSize);
}

} // namespace

BENCHMARK(BM_DensifyOmp)->Apply(thread_args)->UseRealTime();
BENCHMARK(BM_DensifyRef)->UseRealTime();
BENCHMARK(BM_BackprojectOmp)->Apply(thread_args)->UseRealTime();
BENCHMARK(BM_BackprojectRef)->UseRealTime();
BENCHMARK(BM_NgfOmp)->Apply(thread_args)->UseRealTime();
BENCHMARK(BM_NgfRef)->UseRealTime();
BENCHMARK(BM_TotalLossOmp)->Apply(thread_args)->UseRealTime();
BENCHMARK(BM_TotalLossRef)->UseRealTime();

BENCHMARK_MAIN();
