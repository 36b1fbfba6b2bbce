#include <cmath>
#include <random>

#include "doctest.h"
#include "feedersim/powerflow.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace feedersim;

namespace {

std::vector<int> random_taps(const Feeder& f, std::mt19937_64& rng) {
    std::vector<int> taps;
    for (const auto& r : f.regulators) taps.push_back(std::uniform_int_distribution<int>(r.tap_min, r.tap_max)(rng));
    return taps;
}

double active_balance(const SolveState& s, const InjectionSet& inj) {
    double net = s.source_power.real() - s.total_line_loss;
    for (const Complex& v : inj.power) net += v.real();
    return net;
}

}  // namespace

TEST_SUITE("powerflow") {

TEST_CASE("no load gives a flat profile") {
    const Feeder f = fixtures::regulated_chain(4, 0.01, 0.01, 10.0);
    const FeederTree t = validate_radial(f);
    const std::vector<int> taps{0};
    const SolveState s = solve(f, t, InjectionSet::zeros(f.buses.size()), taps, 1.0);
    for (std::size_t i = 0; i < f.buses.size(); ++i) CHECK(s.magnitude(i) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s.total_line_loss == 0.0);
    CHECK(line_losses(s, f) == 0.0);
}

TEST_CASE("two-bus closed form") {
    const Feeder f = fixtures::two_bus(0.05, 0.0);
    const FeederTree t = validate_radial(f);
    InjectionSet inj = InjectionSet::zeros(2);
    inj.power[t.bus_index("b2")] = Complex(-0.1, 0.0);
    const SolveState s = solve(f, t, inj, {}, 1.0);
    // (1 + sqrt(1 - 4 * 0.05 * 0.1)) / 2 and 0.05 * (0.1 / V2)^2.
    // The sweep stops at a 1e-8 mismatch, so agreement is well inside 1e-9.
    CHECK(std::abs(s.magnitude(t.bus_index("b2")) - 0.9949747468305833) < 1e-9);
    CHECK(std::abs(s.total_line_loss - 5.050633883346584e-4) < 1e-11);
    CHECK(line_losses(s, f) == doctest::Approx(s.total_line_loss).epsilon(1e-14));
    CHECK(std::abs(s.magnitude(1) - oracle::two_bus_voltage(0.05, 0.0, -0.1, 0.0)) < 1e-9);
}

TEST_CASE("ideal regulator scales the downstream voltage") {
    const Feeder f = fixtures::regulated_chain(2, 0.01, 0.01, 10.0);
    const FeederTree t = validate_radial(f);
    const std::vector<int> taps{4};
    const SolveState s = solve(f, t, InjectionSet::zeros(f.buses.size()), taps, 1.0);
    CHECK(s.magnitude(t.bus_index("reg")) == doctest::Approx(1.025).epsilon(1e-14));
    CHECK(s.magnitude(t.bus_index("b2")) == doctest::Approx(1.025).epsilon(1e-14));
}

TEST_CASE("four-bus network matches the nodal oracle") {
    Feeder f;
    f.base_power_kva = 1000.0;
    f.buses = {{"s", 0.0, 12.47}, {"r", 0.01, 12.47}, {"a", 1.0, 12.47}, {"b", 2.5, 12.47}};
    Regulator reg;
    reg.from_bus = "s";
    reg.to_bus = "r";
    f.regulators = {reg};
    f.segments = {{"r", "a", 0.012, 0.008}, {"a", "b", 0.02, 0.011}};
    f.loads = {{"a", 120.0, 0.9}, {"b", 80.0, 0.95}};
    f.pv_systems = {{"b", 150.0, 1.05, false}};
    const FeederTree t = validate_radial(f);
    const auto inj = oracle::feeder_injections(f, 1.0, 0.6);
    const std::vector<int> taps{3};
    const SolveState s = solve(f, t, InjectionSet{inj}, taps, 1.0);
    const auto ref = oracle::newton_solve(f, inj, taps, 1.0);
    for (std::size_t i = 0; i < f.buses.size(); ++i) CHECK(std::abs(s.voltage[i] - ref.voltage[i]) < 1e-6);
    CHECK(std::abs(s.total_line_loss - ref.line_loss) < 1e-8);
}

TEST_CASE("random radial networks match the nodal oracle") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> scale(0.0, 1.5);
    for (int trial = 0; trial < 300; ++trial) {
        const Feeder f = oracle::random_feeder(rng);
        const FeederTree t = validate_radial(f);
        const auto inj = oracle::feeder_injections(f, scale(rng), scale(rng));
        const auto taps = random_taps(f, rng);
        const double source = 0.97 + 0.06 * scale(rng) / 1.5;
        const SolveState s = solve(f, t, InjectionSet{inj}, taps, source);
        const auto ref = oracle::newton_solve(f, inj, taps, source);
        double worst = 0.0;
        for (std::size_t i = 0; i < f.buses.size(); ++i) worst = std::max(worst, std::abs(s.voltage[i] - ref.voltage[i]));
        INFO("trial " << trial);
        CHECK(worst < 1e-6);
        CHECK(std::abs(s.total_line_loss - ref.line_loss) < 1e-8);
    }
}

TEST_CASE("conservation and per-bus balance") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> scale(0.0, 1.5);
    for (int trial = 0; trial < 200; ++trial) {
        const Feeder f = oracle::random_feeder(rng);
        const FeederTree t = validate_radial(f);
        const InjectionSet inj{oracle::feeder_injections(f, scale(rng), scale(rng))};
        const auto taps = random_taps(f, rng);
        const SolveState s = solve(f, t, inj, taps, 1.0);
        CHECK(std::abs(active_balance(s, inj)) < 1e-6);
        CHECK(power_balance_mismatch(f, t, inj, s) < 1e-6);
        CHECK(line_losses(s, f) == doctest::Approx(s.total_line_loss).epsilon(1e-12));
    }
}

TEST_CASE("voltage falls along a loaded chain and rises toward a lone PV") {
    const Feeder f = fixtures::regulated_chain(6, 0.01, 0.006, 100.0);
    const FeederTree t = validate_radial(f);
    const std::vector<int> taps{0};
    InjectionSet loads{oracle::feeder_injections(f, 1.0, 0.0)};
    const SolveState s = solve(f, t, loads, taps, 1.0);
    for (int i = 2; i <= 6; ++i) {
        CHECK(s.magnitude(t.bus_index("b" + std::to_string(i))) <= s.magnitude(t.bus_index("b" + std::to_string(i - 1))));
    }
    InjectionSet pv = InjectionSet::zeros(f.buses.size());
    pv.power[t.bus_index("b6")] = Complex(0.8, 0.0);
    const SolveState up = solve(f, t, pv, taps, 1.0);
    for (int i = 2; i <= 6; ++i) {
        CHECK(up.magnitude(t.bus_index("b" + std::to_string(i))) >=
              up.magnitude(t.bus_index("b" + std::to_string(i - 1))));
    }
}

TEST_CASE("on inductive lines more capacitive injection never lowers the local voltage") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        Feeder f = oracle::random_feeder(rng);
        // With X < R the second-order drop term can dominate; the property needs X >= R.
        for (auto& seg : f.segments) seg.reactance = std::max(seg.reactance, seg.resistance);
        const FeederTree t = validate_radial(f);
        InjectionSet inj{oracle::feeder_injections(f, unit(rng), unit(rng))};
        const auto taps = random_taps(f, rng);
        const std::size_t bus = std::uniform_int_distribution<std::size_t>(0, f.buses.size() - 1)(rng);
        const double before = solve(f, t, inj, taps, 1.0).magnitude(bus);
        inj.power[bus] += Complex(0.0, 0.05 + 0.2 * unit(rng));
        CHECK(solve(f, t, inj, taps, 1.0).magnitude(bus) >= before - 1e-12);
    }
}

TEST_CASE("solver errors") {
    const Feeder f = fixtures::two_bus(0.05, 0.05);
    const FeederTree t = validate_radial(f);
    InjectionSet heavy = InjectionSet::zeros(2);
    heavy.power[t.bus_index("b2")] = Complex(-6.0, -3.0);
    try {
        solve(f, t, heavy, {}, 1.0);
        FAIL("expected voltage collapse");
    } catch (const PowerFlowError& e) {
        CHECK(e.kind() == PowerFlowError::Kind::VoltageCollapse);
    }

    InjectionSet light = InjectionSet::zeros(2);
    light.power[t.bus_index("b2")] = Complex(-1.0, -0.3);
    SolveOptions once;
    once.max_iterations = 1;
    try {
        solve(f, t, light, {}, 1.0, once);
        FAIL("expected non-convergence");
    } catch (const PowerFlowError& e) {
        CHECK(e.kind() == PowerFlowError::Kind::NonConvergence);
        CHECK(e.last_mismatch() > 1e-8);
    }

    const Feeder r = fixtures::regulated_chain(2, 0.01, 0.01, 10.0);
    const FeederTree rt = validate_radial(r);
    const std::vector<int> bad_tap{17};
    CHECK_THROWS_AS(solve(r, rt, InjectionSet::zeros(r.buses.size()), bad_tap, 1.0), PowerFlowError);
    CHECK_THROWS_AS(solve(r, rt, InjectionSet::zeros(2), std::vector<int>{0}, 1.0), PowerFlowError);
}

}  // TEST_SUITE
