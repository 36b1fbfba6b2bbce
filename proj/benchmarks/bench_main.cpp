#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "feedersim/control.hpp"
#include "feedersim/metrics.hpp"
#include "feedersim/powerflow.hpp"
#include "feedersim/scenario.hpp"
#include "feedersim/synthetic.hpp"

using namespace feedersim;

namespace {

struct PeakCase {
    Feeder feeder;  // bundled feeder at 150 % penetration
    FeederTree tree;
    std::vector<double> load_p, load_q, pv_p;
};

const PeakCase& peak_case() {
    static const PeakCase c = [] {
        SyntheticParams p;
        p.days = 1;
        PeakCase out{scale_to_penetration(generate_synthetic_feeder(p).feeder, 150.0), {}, {}, {}, {}};
        const Feeder& f = out.feeder;
        out.tree = validate_radial(f);
        out.load_p.assign(f.buses.size(), 0.0);
        out.load_q.assign(f.buses.size(), 0.0);
        for (const auto& l : f.loads) {
            const std::size_t i = out.tree.bus_index(l.bus);
            out.load_p[i] += 0.4 * l.peak_active_power / f.base_power_kva;
            out.load_q[i] += 0.4 * l.peak_active_power / f.base_power_kva * std::tan(std::acos(l.power_factor));
        }
        for (const auto& pv : f.pv_systems) out.pv_p.push_back(0.9 * pv.dc_rating / f.base_power_kva);
        return out;
    }();
    return c;
}

void BM_SweepSolve(benchmark::State& state) {
    const PeakCase& c = peak_case();
    const Feeder& f = c.feeder;
    InjectionSet inj = InjectionSet::zeros(f.buses.size());
    for (std::size_t i = 0; i < f.buses.size(); ++i) inj.power[i] = Complex(-c.load_p[i], -c.load_q[i]);
    for (std::size_t k = 0; k < f.pv_systems.size(); ++k) {
        inj.power[c.tree.bus_index(f.pv_systems[k].bus)] += Complex(c.pv_p[k], 0.0);
    }
    const std::vector<int> taps(f.regulators.size(), 0);
    for (auto _ : state) benchmark::DoNotOptimize(solve(f, c.tree, inj, taps, 1.0));
}
BENCHMARK(BM_SweepSolve);

void BM_ControlLoop(benchmark::State& state) {
    const PeakCase& c = peak_case();
    Feeder f = c.feeder;
    for (auto& pv : f.pv_systems) pv.has_smart_inverter = true;
    const std::vector<RegulatorState> regs(f.regulators.size());
    const auto curve = state.range(0) == 0 ? VvcCurve::curve_a() : VvcCurve::curve_b();
    for (auto _ : state) {
        benchmark::DoNotOptimize(control_loop(f, c.tree, {c.load_p, c.load_q, c.pv_p, curve}, regs));
    }
}
BENCHMARK(BM_ControlLoop)->Arg(0)->Arg(1);

void BM_VariabilityScore(benchmark::State& state) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> noise(0.0, 0.002);
    const std::size_t steps = static_cast<std::size_t>(state.range(0));
    std::vector<TimestepRecord> recs(steps);
    std::vector<double> level(120, 1.0);
    for (std::size_t t = 0; t < steps; ++t) {
        for (auto& v : level) v += noise(rng);
        recs[t].voltage = level;
    }
    for (auto _ : state) benchmark::DoNotOptimize(variability_score(recs, 30));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * steps * level.size()));
}
BENCHMARK(BM_VariabilityScore)->Arg(2880)->Arg(20160)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
