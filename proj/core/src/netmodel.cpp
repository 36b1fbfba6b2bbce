#include "feedersim/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

namespace feedersim {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
        if (!out.empty()) out += ", ";
        out += s;
    }
    return out;
}

// Converts a byte offset from the JSON parser into "line L, column C".
std::string describe_offset(std::string_view text, std::size_t byte) {
    byte = std::min(byte, text.size());
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i + 1 < byte; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

const json& require(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw FeederError(FeederError::Kind::MissingField, "missing field '" + where + "." + key + "'");
    }
    return *it;
}

double number_field(const json& obj, const char* key, const std::string& where) {
    const json& v = require(obj, key, where);
    if (!v.is_number()) {
        throw FeederError(FeederError::Kind::Syntax, "field '" + where + "." + key + "' must be a number");
    }
    double d = v.get<double>();
    if (!std::isfinite(d)) {
        throw FeederError(FeederError::Kind::InvalidValue, "field '" + where + "." + key + "' is not finite");
    }
    return d;
}

int integer_field(const json& obj, const char* key, const std::string& where) {
    const json& v = require(obj, key, where);
    if (!v.is_number_integer()) {
        throw FeederError(FeederError::Kind::Syntax, "field '" + where + "." + key + "' must be an integer");
    }
    return v.get<int>();
}

std::string string_field(const json& obj, const char* key, const std::string& where) {
    const json& v = require(obj, key, where);
    if (!v.is_string()) {
        throw FeederError(FeederError::Kind::Syntax, "field '" + where + "." + key + "' must be a string");
    }
    return v.get<std::string>();
}

const json& array_field(const json& root, const char* key) {
    const json& v = require(root, key, "feeder");
    if (!v.is_array()) {
        throw FeederError(FeederError::Kind::Syntax, std::string("field '") + key + "' must be an array");
    }
    return v;
}

std::string element(const char* array, std::size_t i) {
    return std::string(array) + "[" + std::to_string(i) + "]";
}

void invalid(const std::string& what) { throw FeederError(FeederError::Kind::InvalidValue, what); }

struct DisjointSet {
    std::vector<std::size_t> parent;
    explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
};

struct Edge {
    std::size_t a;
    std::size_t b;
    BranchRef ref;
};

std::unordered_map<std::string, std::size_t> index_buses(const Feeder& feeder) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < feeder.buses.size(); ++i) {
        if (!index.emplace(feeder.buses[i].id, i).second) {
            throw FeederError(FeederError::Kind::DuplicateBus, "duplicate bus id '" + feeder.buses[i].id + "'",
                              {feeder.buses[i].id});
        }
    }
    return index;
}

std::size_t lookup(const std::unordered_map<std::string, std::size_t>& index, const std::string& id,
                   const std::string& where) {
    auto it = index.find(id);
    if (it == index.end()) {
        throw FeederError(FeederError::Kind::DanglingReference, where + " references unknown bus '" + id + "'", {id});
    }
    return it->second;
}

}  // namespace

FeederError::FeederError(Kind kind, std::string message, std::vector<std::string> buses)
    : std::runtime_error(std::move(message)), kind_(kind), buses_(std::move(buses)) {}

std::size_t FeederTree::bus_index(std::string_view id) const {
    auto it = index.find(std::string(id));
    if (it == index.end()) throw std::out_of_range("unknown bus '" + std::string(id) + "'");
    return it->second;
}

std::string FeederTree::parent_of(std::string_view id) const {
    std::size_t i = bus_index(id);
    if (parent[i] == npos) return {};
    for (const auto& [name, idx] : index) {
        if (idx == parent[i]) return name;
    }
    return {};
}

Feeder parse_feeder(std::string_view text) {
    json root;
    try {
        root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw FeederError(FeederError::Kind::Syntax,
                          "feeder file syntax error at " + describe_offset(text, e.byte) + ": " + e.what());
    }
    if (!root.is_object()) throw FeederError(FeederError::Kind::Syntax, "feeder file must hold one JSON object");

    Feeder f;
    f.base_power_kva = number_field(root, "base_power_kva", "feeder");

    const json& buses = array_field(root, "buses");
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const std::string where = element("buses", i);
        const json& b = buses[i];
        f.buses.push_back(Bus{string_field(b, "id", where), number_field(b, "distance_from_substation", where),
                              number_field(b, "base_voltage", where)});
    }
    const json& segments = array_field(root, "segments");
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const std::string where = element("segments", i);
        const json& s = segments[i];
        f.segments.push_back(LineSegment{string_field(s, "from_bus", where), string_field(s, "to_bus", where),
                                         number_field(s, "resistance", where), number_field(s, "reactance", where)});
    }
    const json& loads = array_field(root, "loads");
    for (std::size_t i = 0; i < loads.size(); ++i) {
        const std::string where = element("loads", i);
        const json& l = loads[i];
        f.loads.push_back(Load{string_field(l, "bus", where), number_field(l, "peak_active_power", where),
                               number_field(l, "power_factor", where)});
    }
    const json& pvs = array_field(root, "pv_systems");
    for (std::size_t i = 0; i < pvs.size(); ++i) {
        const std::string where = element("pv_systems", i);
        const json& p = pvs[i];
        f.pv_systems.push_back(PvSystem{string_field(p, "bus", where), number_field(p, "dc_rating", where),
                                        number_field(p, "ac_dc_ratio", where), false});
    }
    const json& regs = array_field(root, "regulators");
    for (std::size_t i = 0; i < regs.size(); ++i) {
        const std::string where = element("regulators", i);
        const json& r = regs[i];
        f.regulators.push_back(Regulator{string_field(r, "from_bus", where), string_field(r, "to_bus", where),
                                         number_field(r, "setpoint", where), number_field(r, "bandwidth", where),
                                         number_field(r, "tap_step", where), integer_field(r, "tap_min", where),
                                         integer_field(r, "tap_max", where)});
    }

    validate_feeder(f);
    return f;
}

std::string serialize_feeder(const Feeder& feeder) {
    ojson root;
    root["base_power_kva"] = feeder.base_power_kva;
    ojson buses = ojson::array();
    for (const auto& b : feeder.buses) {
        buses.push_back({{"id", b.id},
                         {"distance_from_substation", b.distance_from_substation},
                         {"base_voltage", b.base_voltage}});
    }
    root["buses"] = std::move(buses);
    ojson segments = ojson::array();
    for (const auto& s : feeder.segments) {
        segments.push_back(
            {{"from_bus", s.from_bus}, {"to_bus", s.to_bus}, {"resistance", s.resistance}, {"reactance", s.reactance}});
    }
    root["segments"] = std::move(segments);
    ojson loads = ojson::array();
    for (const auto& l : feeder.loads) {
        loads.push_back({{"bus", l.bus}, {"peak_active_power", l.peak_active_power}, {"power_factor", l.power_factor}});
    }
    root["loads"] = std::move(loads);
    ojson pvs = ojson::array();
    for (const auto& p : feeder.pv_systems) {
        pvs.push_back({{"bus", p.bus}, {"dc_rating", p.dc_rating}, {"ac_dc_ratio", p.ac_dc_ratio}});
    }
    root["pv_systems"] = std::move(pvs);
    ojson regs = ojson::array();
    for (const auto& r : feeder.regulators) {
        regs.push_back({{"from_bus", r.from_bus},
                        {"to_bus", r.to_bus},
                        {"setpoint", r.setpoint},
                        {"bandwidth", r.bandwidth},
                        {"tap_step", r.tap_step},
                        {"tap_min", r.tap_min},
                        {"tap_max", r.tap_max}});
    }
    root["regulators"] = std::move(regs);
    return root.dump(2) + "\n";
}

void validate_feeder(const Feeder& f, bool allow_zero_pv) {
    if (!(f.base_power_kva > 0.0) || !std::isfinite(f.base_power_kva)) {
        invalid("base_power_kva must be positive");
    }
    if (f.buses.empty()) invalid("feeder has no buses");

    std::size_t at_zero = 0;
    for (std::size_t i = 0; i < f.buses.size(); ++i) {
        const Bus& b = f.buses[i];
        if (b.id.empty()) invalid(element("buses", i) + ".id is empty");
        if (!(b.distance_from_substation >= 0.0)) invalid("bus '" + b.id + "' has negative distance");
        if (!(b.base_voltage > 0.0)) invalid("bus '" + b.id + "' has nonpositive base_voltage");
        if (b.distance_from_substation == 0.0) ++at_zero;
    }
    auto index = index_buses(f);
    if (at_zero != 1) {
        throw FeederError(FeederError::Kind::NoSubstation,
                          "exactly one bus must sit at distance 0 (found " + std::to_string(at_zero) + ")");
    }

    for (std::size_t i = 0; i < f.segments.size(); ++i) {
        const LineSegment& s = f.segments[i];
        const std::string where = element("segments", i);
        lookup(index, s.from_bus, where);
        lookup(index, s.to_bus, where);
        if (s.from_bus == s.to_bus) {
            throw FeederError(FeederError::Kind::Cycle, where + " is a self loop", {s.from_bus});
        }
        if (!(s.resistance >= 0.0) || !(s.reactance >= 0.0)) invalid(where + " has negative impedance");
        if (s.resistance == 0.0 && s.reactance == 0.0) invalid(where + " has zero impedance");
    }
    double peak = 0.0;
    for (std::size_t i = 0; i < f.loads.size(); ++i) {
        const Load& l = f.loads[i];
        const std::string where = element("loads", i);
        lookup(index, l.bus, where);
        if (!(l.peak_active_power >= 0.0)) invalid(where + " has negative peak_active_power");
        if (!(l.power_factor > 0.0 && l.power_factor <= 1.0)) invalid(where + " power_factor outside (0, 1]");
        peak += l.peak_active_power;
    }
    if (!(peak > 0.0)) invalid("feeder peak load must be positive");
    for (std::size_t i = 0; i < f.pv_systems.size(); ++i) {
        const PvSystem& p = f.pv_systems[i];
        const std::string where = element("pv_systems", i);
        lookup(index, p.bus, where);
        bool ok = allow_zero_pv ? p.dc_rating >= 0.0 : p.dc_rating > 0.0;
        if (!ok || !std::isfinite(p.dc_rating)) invalid(where + " has invalid dc_rating");
        if (!(p.ac_dc_ratio > 0.0)) invalid(where + " has nonpositive ac_dc_ratio");
    }
    for (std::size_t i = 0; i < f.regulators.size(); ++i) {
        const Regulator& r = f.regulators[i];
        const std::string where = element("regulators", i);
        lookup(index, r.from_bus, where);
        lookup(index, r.to_bus, where);
        if (r.from_bus == r.to_bus) {
            throw FeederError(FeederError::Kind::Cycle, where + " is a self loop", {r.from_bus});
        }
        if (!(r.tap_min <= 0 && r.tap_max >= 0)) invalid(where + " tap range must contain 0");
        if (!(r.tap_step > 0.0)) invalid(where + " tap_step must be positive");
        if (!(r.bandwidth > 0.0)) invalid(where + " bandwidth must be positive");
        const double lo = r.setpoint - r.bandwidth / 2.0;
        const double hi = r.setpoint + r.bandwidth / 2.0;
        if (!(lo >= 0.9 && hi <= 1.1)) invalid(where + " band lies outside [0.9, 1.1] p.u.");
    }

    FeederTree tree = validate_radial(f);
    if (!f.regulators.empty()) {
        bool at_substation = std::any_of(f.regulators.begin(), f.regulators.end(), [&](const Regulator& r) {
            return index.at(r.from_bus) == tree.root;
        });
        if (!at_substation) {
            throw FeederError(FeederError::Kind::RegulatorPlacement, "no regulator on the substation branch",
                              {f.buses[tree.root].id});
        }
    }
    bus_distances(f);
}

FeederTree validate_radial(const Feeder& f) {
    FeederTree tree;
    tree.index = index_buses(f);
    const std::size_t n = f.buses.size();

    std::vector<Edge> edges;
    edges.reserve(f.segments.size() + f.regulators.size());
    for (std::size_t i = 0; i < f.segments.size(); ++i) {
        const std::string where = element("segments", i);
        edges.push_back({lookup(tree.index, f.segments[i].from_bus, where),
                         lookup(tree.index, f.segments[i].to_bus, where), {BranchKind::Segment, i}});
    }
    for (std::size_t i = 0; i < f.regulators.size(); ++i) {
        const std::string where = element("regulators", i);
        edges.push_back({lookup(tree.index, f.regulators[i].from_bus, where),
                         lookup(tree.index, f.regulators[i].to_bus, where), {BranchKind::Regulator, i}});
    }

    // Cycle detection. On the first closing edge, report the buses on the
    // forest path between its endpoints.
    DisjointSet dsu(n);
    std::vector<std::vector<std::pair<std::size_t, BranchRef>>> adjacency(n);
    for (const Edge& e : edges) {
        std::size_t ra = dsu.find(e.a);
        std::size_t rb = dsu.find(e.b);
        if (ra == rb) {
            std::vector<std::size_t> prev(n, FeederTree::npos);
            std::queue<std::size_t> q;
            q.push(e.a);
            prev[e.a] = e.a;
            while (!q.empty()) {
                std::size_t u = q.front();
                q.pop();
                if (u == e.b) break;
                for (const auto& [v, ref] : adjacency[u]) {
                    if (prev[v] == FeederTree::npos) {
                        prev[v] = u;
                        q.push(v);
                    }
                }
            }
            std::set<std::string> members;
            for (std::size_t u = e.b;; u = prev[u]) {
                members.insert(f.buses[u].id);
                if (u == e.a) break;
            }
            std::vector<std::string> ids(members.begin(), members.end());
            throw FeederError(FeederError::Kind::Cycle, "cycle detected through buses {" + join(ids) + "}", ids);
        }
        dsu.parent[ra] = rb;
        adjacency[e.a].push_back({e.b, e.ref});
        adjacency[e.b].push_back({e.a, e.ref});
    }

    std::vector<std::size_t> roots;
    for (std::size_t i = 0; i < n; ++i) {
        if (f.buses[i].distance_from_substation == 0.0) roots.push_back(i);
    }
    if (roots.size() != 1) {
        throw FeederError(FeederError::Kind::NoSubstation,
                          "exactly one bus must sit at distance 0 (found " + std::to_string(roots.size()) + ")");
    }
    tree.root = roots.front();

    tree.parent.assign(n, FeederTree::npos);
    tree.parent_branch.assign(n, BranchRef{});
    tree.depth.assign(n, 0);
    tree.children.assign(n, {});
    std::vector<bool> seen(n, false);
    std::queue<std::size_t> q;
    q.push(tree.root);
    seen[tree.root] = true;
    while (!q.empty()) {
        std::size_t u = q.front();
        q.pop();
        tree.order.push_back(u);
        for (const auto& [v, ref] : adjacency[u]) {
            if (seen[v]) continue;
            if (ref.kind == BranchKind::Regulator && tree.index.at(f.regulators[ref.index].from_bus) != u) {
                throw FeederError(FeederError::Kind::RegulatorPlacement,
                                  "regulator " + f.regulators[ref.index].from_bus + "->" +
                                      f.regulators[ref.index].to_bus + " points toward the substation",
                                  {f.regulators[ref.index].from_bus, f.regulators[ref.index].to_bus});
            }
            seen[v] = true;
            tree.parent[v] = u;
            tree.parent_branch[v] = ref;
            tree.depth[v] = tree.depth[u] + 1;
            tree.children[u].push_back(v);
            q.push(v);
        }
    }
    if (tree.order.size() != n) {
        std::vector<std::string> orphans;
        for (std::size_t i = 0; i < n; ++i) {
            if (!seen[i]) orphans.push_back(f.buses[i].id);
        }
        std::sort(orphans.begin(), orphans.end());
        throw FeederError(FeederError::Kind::Disconnected, "buses not connected to the substation: {" + join(orphans) + "}",
                          orphans);
    }
    return tree;
}

std::map<std::string, double> bus_distances(const Feeder& feeder) {
    FeederTree tree = validate_radial(feeder);
    std::map<std::string, double> out;
    for (std::size_t u : tree.order) {
        const Bus& b = feeder.buses[u];
        if (tree.parent[u] != FeederTree::npos) {
            const Bus& p = feeder.buses[tree.parent[u]];
            if (b.distance_from_substation < p.distance_from_substation) {
                std::ostringstream msg;
                msg << "bus '" << b.id << "' is closer to the substation (" << b.distance_from_substation
                    << " km) than its parent '" << p.id << "' (" << p.distance_from_substation << " km)";
                throw FeederError(FeederError::Kind::DistanceInconsistency, msg.str(), {b.id});
            }
        }
        out.emplace(b.id, b.distance_from_substation);
    }
    return out;
}

double peak_load_kw(const Feeder& feeder) {
    double total = 0.0;
    for (const auto& l : feeder.loads) total += l.peak_active_power;
    return total;
}

}  // namespace feedersim
