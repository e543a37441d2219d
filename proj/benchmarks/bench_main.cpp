#include <benchmark/benchmark.h>

#include <random>

#include "debiasmix/autograd.hpp"
#include "debiasmix/dataset.hpp"
#include "debiasmix/identification.hpp"
#include "debiasmix/mixing.hpp"
#include "debiasmix/models.hpp"
#include "debiasmix/optim.hpp"
#include "debiasmix/pair_sampler.hpp"
#include "debiasmix/reparam.hpp"
#include "debiasmix/training.hpp"

using namespace debiasmix;

namespace {

ag::Matrix random_matrix(ag::Index r, ag::Index c, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  ag::Matrix m(r, c);
  for (ag::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

GeneratorConfig bench_generator() {
  GeneratorConfig g;
  g.n_per_class = 200;
  return g;
}

}  // namespace

static void BM_MatmulCrossEntropyBackward(benchmark::State& state) {
  const auto n = static_cast<ag::Index>(state.range(0));
  Rng rng = make_rng(1);
  const ag::Var x(random_matrix(n, 192, rng));
  ag::Var w(random_matrix(192, 10, rng), true);
  ag::Matrix targets = ag::Matrix::Zero(n, 10);
  for (ag::Index i = 0; i < n; ++i) targets(i, i % 10) = 1.0;
  for (auto _ : state) {
    w.zero_grad();
    ag::softmax_cross_entropy(ag::matmul(x, w), targets).backward();
    benchmark::DoNotOptimize(w.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_MatmulCrossEntropyBackward)->Arg(64)->Arg(256);

static void BM_BetaReparamSample(benchmark::State& state) {
  const double a = static_cast<double>(state.range(0)) / 10.0;
  Rng rng = make_rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(sample_beta_reparam(a, 2.0, rng));
}
BENCHMARK(BM_BetaReparamSample)->Arg(5)->Arg(20)->Arg(80);

static void BM_UpdateWeightVector(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng = make_rng(3);
  std::uniform_int_distribution<int> sums(0, 5);
  std::vector<double> c(n, 1.0);
  std::vector<int> s(n);
  for (auto& v : s) v = sums(rng);
  for (auto _ : state) benchmark::DoNotOptimize(update_weight_vector(c, s, 5));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_UpdateWeightVector)->Arg(2000)->Arg(50000);

static void BM_PairSamplerNext(benchmark::State& state) {
  const DatasetBundle bundle = generate_synthetic_biased(bench_generator(), 4);
  const BiasSplit split = make_oracle_split(train_aligned_flags(bundle));
  PairSampler sampler(split, bundle, 256, 4);
  for (auto _ : state) benchmark::DoNotOptimize(sampler.next());
}
BENCHMARK(BM_PairSamplerNext);

static void BM_LMixTrainingStep(benchmark::State& state) {
  const DatasetBundle bundle = generate_synthetic_biased(bench_generator(), 5);
  const BiasSplit split = make_oracle_split(train_aligned_flags(bundle));
  ModelTriplet model(resolve_architecture({}, bundle), 5);
  Adam opt(vars_of(model.all_parameters()));
  PairSampler sampler(split, bundle, 256, 5);
  const PairBatch batch = sampler.next();
  Rng rng = make_rng(5, streams::kMix);
  for (auto _ : state) benchmark::DoNotOptimize(l_mix_training_step(batch, model, opt, {}, 0.05, rng).total.item());
}
BENCHMARK(BM_LMixTrainingStep)->Unit(benchmark::kMillisecond);

static void BM_SMixTrainingStep(benchmark::State& state) {
  const DatasetBundle bundle = generate_synthetic_biased(bench_generator(), 6);
  const BiasSplit split = make_oracle_split(train_aligned_flags(bundle));
  ModelTriplet model(resolve_architecture({}, bundle), 6);
  Adam opt(vars_of(model.classification_parameters()));
  PairSampler sampler(split, bundle, 256, 6);
  MixPartnerSource partners(bundle, split);
  const PairBatch batch = sampler.next();
  Rng rng = make_rng(6, streams::kMix);
  for (auto _ : state) {
    benchmark::DoNotOptimize(s_mix_step(batch, model, opt, {}, 0.95, partners, rng).total.item());
  }
}
BENCHMARK(BM_SMixTrainingStep)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
