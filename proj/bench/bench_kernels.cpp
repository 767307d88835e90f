// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>

#include <vector>

#include "vaporcell/hanle.hpp"
#include "vaporcell/lineshape.hpp"
#include "vaporcell/sas.hpp"
#include "vaporcell/sigproc.hpp"
#include "vaporcell/sns.hpp"

using namespace vaporcell;

namespace {

std::vector<double> grid(double lo, double step, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + step * static_cast<double>(i);
  return g;
}

template <bool Parallel>
void optical_depth(benchmark::State& state) {
  lineshape::AbsorptionParams p;
  p.doppler_fwhm_ghz = 0.5;
  const auto lines = lineshape::weighted_lines(p);
  const auto nu = grid(-60.0, 120.0 / static_cast<double>(state.range(0)), static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto od = Parallel ? lineshape::optical_depth(nu, p, lines) : lineshape::optical_depth_serial(nu, p, lines);
    benchmark::DoNotOptimize(od.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void sas_spectrum(benchmark::State& state) {
  const auto cfg = sas::SasConfig::natural_rubidium();
  for (auto _ : state) {
    auto s = Parallel ? sas::sas_spectrum(cfg) : sas::sas_spectrum_serial(cfg);
    benchmark::DoNotOptimize(s.y.data());
  }
}

template <bool Parallel>
void sns_psd(benchmark::State& state) {
  const auto m = sns::natural_rubidium_model(10.0);
  const auto f = grid(0.0, 0.01, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto s = Parallel ? sns::sns_psd(f, m) : sns::sns_psd_serial(f, m);
    benchmark::DoNotOptimize(s.y.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void welch(benchmark::State& state) {
  const auto ts = TimeSeries::uniform(sigproc::white_noise(static_cast<std::size_t>(state.range(0)), 1e5, 1.0, 1), 1e5, "V");
  sigproc::WelchOptions o;
  o.segment_length = 4096;
  for (auto _ : state) {
    auto p = Parallel ? sigproc::welch_asd(ts, o) : sigproc::welch_asd_serial(ts, o);
    benchmark::DoNotOptimize(p.asd.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void steady_state_sweep(benchmark::State& state) {
  const hanle::BlochConfig c;
  const auto bx = grid(-40.0, 80.0 / 32.0, 33);
  for (auto _ : state) {
    auto s = Parallel ? hanle::steady_state_sweep(c, bx) : hanle::steady_state_sweep_serial(c, bx);
    benchmark::DoNotOptimize(s.data());
  }
}

}  // namespace

BENCHMARK(optical_depth<false>)->Name("optical_depth/serial")->Arg(1 << 16);
BENCHMARK(optical_depth<true>)->Name("optical_depth/omp")->Arg(1 << 16);
BENCHMARK(sas_spectrum<false>)->Name("sas_spectrum/serial");
BENCHMARK(sas_spectrum<true>)->Name("sas_spectrum/omp");
BENCHMARK(sns_psd<false>)->Name("sns_psd/serial")->Arg(1 << 16);
BENCHMARK(sns_psd<true>)->Name("sns_psd/omp")->Arg(1 << 16);
BENCHMARK(welch<false>)->Name("welch/serial")->Arg(1 << 22);
BENCHMARK(welch<true>)->Name("welch/omp")->Arg(1 << 22);
BENCHMARK(steady_state_sweep<false>)->Name("steady_state_sweep/serial");
BENCHMARK(steady_state_sweep<true>)->Name("steady_state_sweep/omp");

BENCHMARK_MAIN();
