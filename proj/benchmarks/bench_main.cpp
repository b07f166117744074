#include <benchmark/benchmark.h>

#include "igtrack/crop.hpp"
#include "igtrack/geometry.hpp"
#include "igtrack/net.hpp"
#include "igtrack/rng.hpp"
#include "igtrack/synthetic.hpp"
#include "igtrack/tracker.hpp"
#include "igtrack/train.hpp"

namespace {

using namespace igtrack;

const Dataset& bench_data() {
    static const Dataset d = [] {
        SyntheticConfig c;
        c.n_sequences = 4;
        c.n_frames = 20;
        return gen_synthetic(c);
    }();
    return d;
}

void BM_Iou(benchmark::State& state) {
    Rng rng(1);
    std::vector<Box> boxes;
    for (int i = 0; i < 1024; ++i) boxes.push_back({rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(5, 50), rng.uniform(5, 50)});
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(iou(boxes[i & 1023], boxes[(i + 7) & 1023]));
        ++i;
    }
}
BENCHMARK(BM_Iou);

void BM_CropSearch(benchmark::State& state) {
    const SequenceRecord& seq = bench_data()[0];
    for (auto _ : state) benchmark::DoNotOptimize(crop_search(seq.frames[1], seq.gt[1]));
}
BENCHMARK(BM_CropSearch)->Unit(benchmark::kMicrosecond);

void BM_Forward(benchmark::State& state) {
    const NetConfig net = NetConfig::standard();
    const ParamStore params = init_params<float>(net, 1);
    const TrainingPair pair = sample_pair(bench_data(), 3, 5);
    for (auto _ : state) benchmark::DoNotOptimize(forward(params, net, pair.template_patch, pair.search_patch).cls);
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    TrainConfig c;
    c.epochs = 1;
    c.steps_per_epoch = 1;
    c.batch = 1;
    for (auto _ : state) benchmark::DoNotOptimize(train(bench_data(), c).log.size());
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_TrackFrame(benchmark::State& state) {
    const Model model = Model::from_params(init_params<float>(NetConfig::standard(), 1));
    const SequenceRecord& seq = bench_data()[0];
    TrackerState ts = track_init(model, seq.frames[0], seq.gt[0], TrackerConfig::defaults(TrackerMode::kIg));
    std::size_t f = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(track_frame(model, ts, seq.frames[f]));
        f = f + 1 < seq.frames.size() ? f + 1 : 1;
    }
}
BENCHMARK(BM_TrackFrame)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
