#include <cmath>
#include <random>

#include "doctest.h"
#include "feedersim/control.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace feedersim;

namespace {

// Two-bus feeder with a 1000 kW DC smart inverter at the far bus.
Feeder two_bus_with_pv(double r, double x, double load_kw) {
    Feeder f = fixtures::two_bus(r, x, load_kw);
    f.pv_systems = {{"b2", 1000.0, 1.05, true}};
    return f;
}

struct Inputs {
    std::vector<double> load_p, load_q, pv_p;
    ControlInputs view(std::optional<VvcCurve> curve) const { return {load_p, load_q, pv_p, curve}; }
};

Inputs peak_inputs(const Feeder& f, const FeederTree& t, double load_scale, std::vector<double> pv_p) {
    Inputs in;
    in.load_p.assign(f.buses.size(), 0.0);
    in.load_q.assign(f.buses.size(), 0.0);
    for (const auto& l : f.loads) {
        const double p = l.peak_active_power * load_scale / f.base_power_kva;
        in.load_p[t.bus_index(l.bus)] += p;
        in.load_q[t.bus_index(l.bus)] += p * std::tan(std::acos(l.power_factor));
    }
    in.pv_p = std::move(pv_p);
    return in;
}

}  // namespace

TEST_SUITE("control") {

TEST_CASE("available reactive power") {
    CHECK(available_q(0.0, 1.05) == doctest::Approx(1.05));
    CHECK(available_q(1.0, 1.05) == doctest::Approx(0.320156).epsilon(1e-6));
    CHECK(available_q(1.05, 1.05) == 0.0);
    CHECK(available_q(1.2, 1.05) == 0.0);
    CHECK_THROWS_AS(available_q(-0.1, 1.05), std::invalid_argument);
    CHECK_THROWS_AS(available_q(0.5, 0.0), std::invalid_argument);
}

TEST_CASE("curve values") {
    const VvcCurve a = VvcCurve::curve_a();
    const VvcCurve b = VvcCurve::curve_b();
    CHECK(evaluate_curve(a, 1.00) == 0.0);
    CHECK(evaluate_curve(a, 0.95) == 1.0);
    CHECK(evaluate_curve(a, 0.90) == 1.0);
    CHECK(evaluate_curve(a, 1.035) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(evaluate_curve(a, 0.965) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(evaluate_curve(b, 1.025) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(evaluate_curve(b, 1.0) == 0.0);
    CHECK(evaluate_curve(a, 1.20) == -1.0);
    CHECK(evaluate_curve(b, 1.20) == -1.0);
    CHECK(parse_curve_choice("B") == CurveChoice::B);
    CHECK(parse_curve_choice("none") == CurveChoice::None);
    CHECK_THROWS_AS(parse_curve_choice("c"), std::invalid_argument);
    CHECK(!curve_for(CurveChoice::None));
}

TEST_CASE("curves are nonincreasing and curve b dominates curve a") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> volt(0.85, 1.15);
    for (int trial = 0; trial < 2000; ++trial) {
        double v[4] = {volt(rng), volt(rng), volt(rng), volt(rng)};
        std::sort(v, v + 4);
        const VvcCurve c{v[0], v[1], v[2], v[3]};
        if (!c.valid()) continue;
        double x = volt(rng), y = volt(rng);
        if (x > y) std::swap(x, y);
        CHECK(evaluate_curve(c, x) >= evaluate_curve(c, y));
        const double u = volt(rng);
        CHECK(std::abs(evaluate_curve(VvcCurve::curve_b(), u)) >= std::abs(evaluate_curve(VvcCurve::curve_a(), u)));
    }
}

TEST_CASE("regulator band logic") {
    const Regulator reg;
    RegulatorStep s = regulator_step(reg, {0, 0}, 0.99);
    CHECK(!s.moved);
    s = regulator_step(reg, {0, 0}, 0.97);
    CHECK(s.moved);
    CHECK(s.state.tap == 1);
    CHECK(s.state.operations_count == 1);
    s = regulator_step(reg, {reg.tap_max, 5}, 0.90);
    CHECK(!s.moved);
    CHECK(s.state == RegulatorState{reg.tap_max, 5});
    s = regulator_step(reg, {0, 2}, 1.01);
    CHECK(s.state == RegulatorState{-1, 3});
}

TEST_CASE("inactive controls reproduce the plain solve") {
    const Feeder f = fixtures::regulated_chain(3, 0.01, 0.01, 50.0);
    const FeederTree t = validate_radial(f);
    const Inputs in = peak_inputs(f, t, 1.0, {});
    const std::vector<RegulatorState> regs{{0, 0}};
    const ControlResult r = control_loop(f, t, in.view(std::nullopt), regs);
    InjectionSet inj = InjectionSet::zeros(f.buses.size());
    for (std::size_t i = 0; i < f.buses.size(); ++i) inj.power[i] = -Complex(in.load_p[i], in.load_q[i]);
    const SolveState s = solve(f, t, inj, std::vector<int>{r.regulators[0].tap}, 1.0);
    for (std::size_t i = 0; i < f.buses.size(); ++i) CHECK(r.state.voltage[i] == s.voltage[i]);
    CHECK(r.flags == kControlOk);
}

TEST_CASE("deadband leaves q at zero after one iteration") {
    const Feeder f = two_bus_with_pv(0.01, 0.01, 100.0);
    const FeederTree t = validate_radial(f);
    const Inputs in = peak_inputs(f, t, 1.0, {0.3});
    const ControlResult r = control_loop(f, t, in.view(VvcCurve::curve_a()), {});
    CHECK(r.state.magnitude(1) > 0.98);
    CHECK(r.state.magnitude(1) < 1.02);
    CHECK(r.inverters[0].reactive_power == 0.0);
    CHECK(r.inner_iterations == 1);
}

TEST_CASE("two-bus Volt/VAr fixed point matches bisection") {
    const double r = 0.05, x = 0.05;
    const Feeder f = two_bus_with_pv(r, x, 100.0);
    const FeederTree t = validate_radial(f);
    const double p = 0.9;
    const Inputs in = peak_inputs(f, t, 1.0, {p});
    const double avail = available_q(p, 1.05);
    const VvcCurve b = VvcCurve::curve_b();

    const ControlResult open = control_loop(f, t, in.view(std::nullopt), {});
    const ControlResult res = control_loop(f, t, in.view(b), {});
    const auto ref = oracle::two_bus_vvc_fixed_point(r, x, p - 0.1, 0.0, avail,
                                                     [&](double v) { return evaluate_curve(b, v); });
    const double v2 = res.state.magnitude(t.bus_index("b2"));
    CHECK(res.flags == kControlOk);
    CHECK(open.state.magnitude(t.bus_index("b2")) > b.v3);
    CHECK(res.inverters[0].reactive_power < 0.0);
    CHECK(v2 < open.state.magnitude(t.bus_index("b2")));
    CHECK(std::abs(v2 - ref.voltage) < 1e-4);
    CHECK(std::abs(res.inverters[0].reactive_power - ref.q) < 1e-4);
    CHECK(std::abs(res.inverters[0].reactive_power - avail * evaluate_curve(b, v2)) < 2e-4);
}

TEST_CASE("active power priority, capability and determinism on random feeders") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 150; ++trial) {
        Feeder f = oracle::random_feeder(rng, {3, 10, 0.5, 0.8, 0.7});
        for (auto& pv : f.pv_systems) pv.has_smart_inverter = unit(rng) < 0.7;
        const FeederTree t = validate_radial(f);
        std::vector<double> pv_p;
        for (const auto& pv : f.pv_systems) pv_p.push_back(unit(rng) * pv.kva_rating() / f.base_power_kva);
        const Inputs in = peak_inputs(f, t, unit(rng), pv_p);
        std::vector<RegulatorState> regs(f.regulators.size());
        const auto curve = unit(rng) < 0.5 ? VvcCurve::curve_a() : VvcCurve::curve_b();
        const ControlResult r1 = control_loop(f, t, in.view(curve), regs);
        const ControlResult r2 = control_loop(f, t, in.view(curve), regs);
        for (std::size_t k = 0; k < f.pv_systems.size(); ++k) {
            const auto& inv = r1.inverters[k];
            CHECK(inv.active_power == pv_p[k]);
            CHECK(inv.active_power * inv.active_power + inv.reactive_power * inv.reactive_power <=
                  inv.kva_rating * inv.kva_rating + 1e-12);
            CHECK(inv.reactive_power == r2.inverters[k].reactive_power);
            if (!f.pv_systems[k].has_smart_inverter) CHECK(inv.reactive_power == 0.0);
            if (r1.flags == kControlOk && f.pv_systems[k].has_smart_inverter) {
                const double v = r1.state.magnitude(t.bus_index(f.pv_systems[k].bus));
                const double target =
                    available_q(inv.active_power, inv.kva_rating) * evaluate_curve(curve, v);
                CHECK(std::abs(inv.reactive_power - target) < 2e-4);
            }
        }
        for (std::size_t i = 0; i < f.buses.size(); ++i) CHECK(r1.state.voltage[i] == r2.state.voltage[i]);
        CHECK(r1.regulators == r2.regulators);
    }
}

TEST_CASE("regulator raises taps when the source sags") {
    const Feeder f = fixtures::regulated_chain(5, 0.01, 0.006, 250.0);
    const FeederTree t = validate_radial(f);
    const Inputs in = peak_inputs(f, t, 1.0, {});
    ControlOptions sag;
    sag.source_voltage = 0.95;
    const ControlResult r = control_loop(f, t, in.view(std::nullopt), std::vector<RegulatorState>{{0, 0}}, sag);
    const Regulator& reg = f.regulators[0];
    const double v = r.state.magnitude(t.bus_index("reg"));
    CHECK(r.regulators[0].tap > 0);
    CHECK(r.regulators[0].operations_count == r.regulators[0].tap);
    CHECK(v >= reg.setpoint - reg.bandwidth / 2);
    CHECK(v <= reg.setpoint + reg.bandwidth / 2);
}

TEST_CASE("oscillation and hunting are flagged") {
    Feeder stiff = two_bus_with_pv(0.02, 0.1, 10.0);
    const FeederTree st = validate_radial(stiff);
    const Inputs in = peak_inputs(stiff, st, 1.0, {0.1});
    ControlOptions undamped;
    undamped.damping = 1.0;
    const ControlResult osc = control_loop(stiff, st, in.view(VvcCurve::curve_b()), {}, undamped);
    CHECK((osc.flags & kVvcOscillation) != 0);
    CHECK(osc.previous_q.size() == 1);
    CHECK(osc.last_q.size() == 1);

    Feeder hunt = fixtures::regulated_chain(1, 0.001, 0.0, 1.0);
    hunt.regulators[0].bandwidth = 0.002;
    const FeederTree ht = validate_radial(hunt);
    const Inputs quiet = peak_inputs(hunt, ht, 0.0, {});
    const ControlResult h = control_loop(hunt, ht, quiet.view(std::nullopt), std::vector<RegulatorState>{{0, 0}});
    CHECK((h.flags & kRegulatorHunting) != 0);
    CHECK(h.regulator_rounds == ControlOptions{}.max_regulator_rounds);
}

TEST_CASE("regulators are stepped substation first, then by depth") {
    Feeder f = fixtures::regulated_chain(3, 0.01, 0.01, 10.0);
    f.buses.push_back({"mid", 2.01, 12.47});
    for (auto& s : f.segments) {
        if (s.from_bus == "b2") s.from_bus = "mid";
    }
    Regulator mid;
    mid.from_bus = "b2";
    mid.to_bus = "mid";
    f.regulators.insert(f.regulators.begin(), mid);
    const FeederTree t = validate_radial(f);
    CHECK(regulator_order(f, t) == std::vector<std::size_t>{1, 0});
}

TEST_CASE("input checks") {
    const Feeder f = two_bus_with_pv(0.01, 0.01, 100.0);
    const FeederTree t = validate_radial(f);
    const Inputs over = peak_inputs(f, t, 1.0, {1.2});
    CHECK_THROWS_AS(control_loop(f, t, over.view(std::nullopt), {}), std::invalid_argument);
    const Inputs wrong = peak_inputs(f, t, 1.0, {});
    CHECK_THROWS_AS(control_loop(f, t, wrong.view(std::nullopt), {}), std::invalid_argument);
}

}  // TEST_SUITE
