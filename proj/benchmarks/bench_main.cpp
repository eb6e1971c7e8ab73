#include <benchmark/benchmark.h>

#include <torch/torch.h>

#include "pipgan/evaluation.hpp"
#include "pipgan/losses.hpp"
#include "pipgan/networks.hpp"
#include "pipgan/training.hpp"

namespace {

using namespace pipgan;

NetworkConfig bench_network(int size, int base) {
    NetworkConfig n;
    n.image_size = size;
    n.base_channels = base;
    n.disc_base_channels = base;
    n.num_classes = 5;
    return n;
}

std::vector<SampleRecord> random_records(int count, int size, int k) {
    auto gen = make_generator(17);
    std::vector<SampleRecord> records;
    for (int i = 0; i < count; ++i) {
        SampleRecord r;
        r.input = torch::rand({3, size, size}, gen);
        r.target = torch::rand({3, size, size}, gen);
        r.condition = ConditionVector::one_hot(i % k, k);
        r.subject_id = "s" + std::to_string(i);
        records.push_back(std::move(r));
    }
    return records;
}

void BM_ImageMetrics(benchmark::State& state) {
    const auto size = state.range(0);
    auto gen = make_generator(1);
    auto a = torch::rand({3, size, size}, gen);
    auto b = torch::rand({3, size, size}, gen);
    for (auto _ : state) benchmark::DoNotOptimize(image_metrics(a, b));
    state.SetItemsProcessed(state.iterations() * 3 * size * size);
}
BENCHMARK(BM_ImageMetrics)->Arg(64)->Arg(128)->Arg(256);

void BM_GeneratorForward(benchmark::State& state) {
    torch::NoGradGuard no_grad;
    const int size = static_cast<int>(state.range(0));
    Generator g(bench_network(size, 32));
    g->eval();
    const int batch = 8;
    auto gen = make_generator(2);
    auto images = torch::rand({batch, 3, size, size}, gen);
    std::vector<ConditionVector> conds(batch, ConditionVector::one_hot(1, 5));
    auto condition = stack_conditions(conds);
    for (auto _ : state) benchmark::DoNotOptimize(g->generate(images, condition));
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_GeneratorForward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_CascadeLoss(benchmark::State& state) {
    torch::NoGradGuard no_grad;
    auto cascade = make_cascade_net("", 3);
    auto gen = make_generator(3);
    auto a = torch::rand({8, 3, 64, 64}, gen);
    auto b = torch::rand({8, 3, 64, 64}, gen);
    const auto lambdas = cascade_lambdas(cascade, 64, LambdaMode::unit);
    for (auto _ : state) benchmark::DoNotOptimize(cascade_loss(cascade, a, b, lambdas));
}
BENCHMARK(BM_CascadeLoss)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    TrainConfig config;
    config.network = bench_network(size, 16);
    config.batch_size = 8;
    auto train_state = TrainState::create(config);
    auto batch = random_records(config.batch_size, size, 5);
    for (auto _ : state) benchmark::DoNotOptimize(train_step(train_state, batch));
    state.SetItemsProcessed(state.iterations() * config.batch_size);
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
    torch::set_num_threads(1);
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
