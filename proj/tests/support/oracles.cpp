#include "oracles.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>

namespace oracle {

using feedersim::Feeder;

NodalSolution newton_solve(const Feeder& feeder, std::span<const Complex> injections, std::span<const int> taps,
                           double source_voltage) {
    const std::size_t n = feeder.buses.size();
    std::map<std::string, std::size_t> idx;
    std::size_t root = n;
    for (std::size_t i = 0; i < n; ++i) {
        idx[feeder.buses[i].id] = i;
        if (feeder.buses[i].distance_from_substation == 0.0) root = i;
    }
    if (root == n) throw std::runtime_error("newton oracle: no substation");

    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& s : feeder.segments) {
        const std::size_t i = idx.at(s.from_bus);
        const std::size_t j = idx.at(s.to_bus);
        const Complex ys = 1.0 / Complex(s.resistance, s.reactance);
        y(i, i) += ys;
        y(j, j) += ys;
        y(i, j) -= ys;
        y(j, i) -= ys;
    }

    // Each bus is represented by a surviving bus times a real factor.
    std::vector<std::size_t> fed_by(n, n);
    std::vector<double> ratio(n, 1.0);
    for (std::size_t k = 0; k < feeder.regulators.size(); ++k) {
        const auto& r = feeder.regulators[k];
        const std::size_t t = idx.at(r.to_bus);
        fed_by[t] = idx.at(r.from_bus);
        ratio[t] = 1.0 + taps[k] * r.tap_step;
    }
    std::vector<std::size_t> rep(n, n);
    std::vector<double> factor(n, 1.0);
    std::function<void(std::size_t)> resolve = [&](std::size_t b) {
        if (rep[b] != n) return;
        if (fed_by[b] == n) {
            rep[b] = b;
            return;
        }
        resolve(fed_by[b]);
        rep[b] = rep[fed_by[b]];
        factor[b] = factor[fed_by[b]] * ratio[b];
    };
    for (std::size_t b = 0; b < n; ++b) resolve(b);

    std::vector<std::size_t> reduced(n, n);
    std::size_t m = 0;
    for (std::size_t b = 0; b < n; ++b) {
        if (rep[b] == b) reduced[b] = m++;
    }
    Eigen::MatrixXd tmat = Eigen::MatrixXd::Zero(n, m);
    for (std::size_t b = 0; b < n; ++b) tmat(b, reduced[rep[b]]) = factor[b];
    const Eigen::MatrixXcd yr = tmat.transpose().cast<Complex>() * y * tmat.cast<Complex>();
    Eigen::VectorXcd sr = Eigen::VectorXcd::Zero(m);
    for (std::size_t b = 0; b < n; ++b) sr(reduced[rep[b]]) += injections[b];

    const std::size_t slack = reduced[root];
    std::vector<std::size_t> pq;
    for (std::size_t i = 0; i < m; ++i) {
        if (i != slack) pq.push_back(i);
    }
    const std::size_t u = pq.size();

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd vm = Eigen::VectorXd::Constant(m, source_voltage);
    NodalSolution out;
    bool converged = false;
    for (int it = 0; it < 50; ++it) {
        Eigen::VectorXcd v(m);
        for (std::size_t i = 0; i < m; ++i) v(i) = std::polar(vm(i), theta(i));
        const Eigen::VectorXcd ibus = yr * v;
        Eigen::VectorXd f(2 * u);
        double worst = 0.0;
        for (std::size_t k = 0; k < u; ++k) {
            const std::size_t i = pq[k];
            const Complex mis = v(i) * std::conj(ibus(i)) - sr(i);
            f(k) = mis.real();
            f(u + k) = mis.imag();
            worst = std::max({worst, std::abs(mis.real()), std::abs(mis.imag())});
        }
        out.iterations = it;
        if (worst < 1e-13) {
            converged = true;
            break;
        }
        // dS/dtheta = j diag(V) conj(diag(I) - Y diag(V))
        // dS/d|V|   = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
        Eigen::MatrixXd jac(2 * u, 2 * u);
        for (std::size_t a = 0; a < u; ++a) {
            const std::size_t i = pq[a];
            for (std::size_t b = 0; b < u; ++b) {
                const std::size_t k = pq[b];
                const Complex unit_k = v(k) / std::abs(v(k));
                Complex d_theta = -yr(i, k) * v(k);
                if (i == k) d_theta += ibus(i);
                d_theta = Complex(0.0, 1.0) * v(i) * std::conj(d_theta);
                Complex d_mag = v(i) * std::conj(yr(i, k) * unit_k);
                if (i == k) d_mag += std::conj(ibus(i)) * unit_k;
                jac(a, b) = d_theta.real();
                jac(u + a, b) = d_theta.imag();
                jac(a, u + b) = d_mag.real();
                jac(u + a, u + b) = d_mag.imag();
            }
        }
        const Eigen::VectorXd dx = jac.fullPivLu().solve(-f);
        for (std::size_t k = 0; k < u; ++k) {
            theta(pq[k]) += dx(k);
            vm(pq[k]) += dx(u + k);
        }
    }
    if (!converged) throw std::runtime_error("newton oracle: no convergence");

    out.voltage.resize(n);
    for (std::size_t b = 0; b < n; ++b) {
        const std::size_t r = reduced[rep[b]];
        out.voltage[b] = factor[b] * std::polar(vm(r), theta(r));
    }
    for (const auto& s : feeder.segments) {
        const Complex z(s.resistance, s.reactance);
        const Complex i = (out.voltage[idx.at(s.from_bus)] - out.voltage[idx.at(s.to_bus)]) / z;
        out.line_loss += std::norm(i) * s.resistance;
    }
    return out;
}

Feeder random_feeder(std::mt19937_64& rng, const RandomFeederOptions& o) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    const int n = std::uniform_int_distribution<int>(o.min_buses, o.max_buses)(rng);

    Feeder f;
    f.base_power_kva = 1000.0;
    std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
    auto name = [](int i) { return "b" + std::to_string(i); };
    f.buses.push_back({name(0), 0.0, 12.47});
    const bool regulated = unit(rng) < o.regulator_probability;
    int first_free = 1;
    if (regulated) {
        dist[1] = 0.01;
        f.buses.push_back({name(1), 0.01, 12.47});
        feedersim::Regulator reg;
        reg.from_bus = name(0);
        reg.to_bus = name(1);
        f.regulators.push_back(reg);
        first_free = 2;
    }
    for (int i = first_free; i < n; ++i) {
        const int lo = regulated ? 1 : 0;
        const int parent = std::uniform_int_distribution<int>(lo, i - 1)(rng);
        dist[i] = dist[parent] + between(0.1, 2.0);
        f.buses.push_back({name(i), dist[i], 12.47});
        feedersim::LineSegment s{name(parent), name(i), between(0.002, 0.02),
                                 unit(rng) < 0.1 ? 0.0 : between(0.001, 0.02)};
        if (unit(rng) < 0.5) std::swap(s.from_bus, s.to_bus);
        f.segments.push_back(s);
    }
    for (int i = 1; i < n; ++i) {
        if (unit(rng) < o.load_probability) f.loads.push_back({name(i), between(10.0, 150.0), between(0.85, 1.0)});
        if (unit(rng) < o.pv_probability) f.pv_systems.push_back({name(i), between(10.0, 300.0), 1.05, false});
    }
    if (f.loads.empty()) f.loads.push_back({name(n - 1), between(10.0, 150.0), between(0.85, 1.0)});
    std::shuffle(f.buses.begin(), f.buses.end(), rng);
    std::shuffle(f.segments.begin(), f.segments.end(), rng);
    return f;
}

std::vector<Complex> feeder_injections(const Feeder& feeder, double load_scale, double pv_scale) {
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < feeder.buses.size(); ++i) idx[feeder.buses[i].id] = i;
    std::vector<Complex> s(feeder.buses.size());
    const double base = feeder.base_power_kva;
    for (const auto& l : feeder.loads) {
        const double p = l.peak_active_power * load_scale / base;
        const double q = p * std::sqrt(1.0 - l.power_factor * l.power_factor) / l.power_factor;
        s[idx.at(l.bus)] -= Complex(p, q);
    }
    for (const auto& pv : feeder.pv_systems) s[idx.at(pv.bus)] += pv.dc_rating * pv_scale / base;
    return s;
}

double two_bus_voltage(double r, double x, double p, double q, double source_voltage) {
    // |V2|^4 - (2(rp + xq) + |V1|^2)|V2|^2 + |z|^2 |s|^2 = 0, upper root.
    const double b = 2.0 * (r * p + x * q) + source_voltage * source_voltage;
    const double c = (r * r + x * x) * (p * p + q * q);
    const double disc = b * b - 4.0 * c;
    if (disc < 0.0) throw std::runtime_error("two-bus oracle: no real solution");
    return std::sqrt(0.5 * (b + std::sqrt(disc)));
}

double dense_grid_variability(std::span<const double> magnitudes, double h, std::size_t grid_points) {
    if (magnitudes.empty()) throw std::invalid_argument("dense grid: empty pool");
    std::vector<std::uint64_t> at_least(grid_points + 2, 0);
    for (double x : magnitudes) {
        const double k = std::abs(x) / h;
        const double kr = std::round(k);
        if (k != kr) throw std::invalid_argument("dense grid: value off the lattice");
        if (kr > static_cast<double>(grid_points)) throw std::invalid_argument("dense grid: value beyond the grid");
        ++at_least[static_cast<std::size_t>(kr)];
    }
    for (std::size_t j = grid_points; j-- > 0;) at_least[j] += at_least[j + 1];
    const double total = static_cast<double>(magnitudes.size());
    double best = 0.0;
    for (std::size_t j = 1; j <= grid_points; ++j) {
        best = std::max(best, static_cast<double>(j) * h * static_cast<double>(at_least[j]) / total);
    }
    return 100.0 * best;
}

std::vector<std::vector<double>> pooled_ramps(std::span<const feedersim::TimestepRecord> records,
                                              std::span<const int> window_steps) {
    std::vector<std::vector<double>> pools;
    const std::size_t steps = records.size();
    const std::size_t buses = records.empty() ? 0 : records.front().voltage.size();
    for (int w : window_steps) {
        const std::size_t n = static_cast<std::size_t>(w);
        std::vector<double> pool;
        for (std::size_t b = 0; b < buses; ++b) {
            for (std::size_t t = n; t + n <= steps; ++t) {
                double after = 0.0;
                double before = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    after += records[t + i].voltage[b];
                    before += records[t - n + i].voltage[b];
                }
                pool.push_back(std::abs(after / w - before / w));
            }
        }
        pools.push_back(std::move(pool));
    }
    return pools;
}

}  // namespace oracle
