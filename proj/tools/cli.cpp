#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "CLI11.hpp"
#include "feedersim/metrics.hpp"
#include "feedersim/netmodel.hpp"
#include "feedersim/report.hpp"
#include "feedersim/scenario.hpp"
#include "feedersim/synthetic.hpp"
#include "json.hpp"

namespace feedersim::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kPresetPenetrations[] = {0, 5, 10, 15, 25, 50, 75, 100, 125, 150, 175, 200};
constexpr double kPresetFractions[] = {0, 50, 100, 100};
constexpr CurveChoice kPresetCurves[] = {CurveChoice::None, CurveChoice::A, CurveChoice::A, CurveChoice::B};
constexpr int kPresetDays = 95;
constexpr Timestamp kDay = 86400;

template <class T>
T field(const ordered_json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("config: missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config: field '") + key + "' has the wrong type");
    }
}

std::string record_file_name(const ScenarioConfig& s) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "pen%g_", s.pv_penetration);
    return std::string(buf) + si_label(s.si_fraction, s.curve) + ".csv";
}

void write_records(const fs::path& path, const Feeder& feeder, const std::vector<TimestepRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << records_csv_header(feeder);
    for (const auto& r : records) out << records_csv_row(r);
    out.flush();
    if (!out) throw IoError("failed writing " + path.string());
}

void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

unsigned default_jobs(std::size_t scenarios) {
    const unsigned cpus = std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(scenarios, cpus));
}

Timestamp default_snapshot(const ProfileSet& profiles, int days, bool preset) {
    // The preset looks at noon of the 25th simulated day when it exists.
    const int day = preset ? std::min(24, days - 1) : 0;
    return profiles.load.start + day * kDay + kDay / 2;
}

struct GenerateArgs {
    bool preset = false;
    std::optional<int> pv_count;
    std::optional<int> bus_count;
    std::optional<int> days;
    std::optional<std::uint64_t> seed;
    std::string out = "feeder";
};

struct RunArgs {
    std::string config;
    bool preset = false;
    std::optional<std::uint64_t> seed;
    std::optional<int> days;
    std::optional<std::string> out;
    std::optional<unsigned> jobs;
    std::optional<bool> records;
};

struct SnapshotArgs {
    std::vector<std::string> records;
    std::string feeder;
    std::string time;
    std::string out;
};

int cmd_generate(const GenerateArgs& args, std::ostream& out) {
    SyntheticParams params;
    if (args.pv_count) params.pv_count = *args.pv_count;
    if (args.bus_count) params.bus_count = *args.bus_count;
    if (args.days) params.days = *args.days;
    if (args.seed) params.seed = *args.seed;
    if (params.days < 1) throw ConfigError("--days must be at least 1");

    SyntheticFeeder synth;
    try {
        synth = generate_synthetic_feeder(params);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("infeasible feeder parameters: ") + e.what());
    }
    const fs::path dir = args.out;
    ensure_directory(dir);
    write_text_file(dir / "feeder.json", serialize_feeder(synth.feeder));
    write_profile_directory(dir / "profiles", synth.profiles);

    RunConfig config;
    config.feeder = "feeder.json";
    config.profile_dir = "profiles";
    config.penetrations = {5, 50, 100, 150, 200};
    config.si_fractions.assign(std::begin(kPresetFractions), std::end(kPresetFractions));
    config.curves.assign(std::begin(kPresetCurves), std::end(kPresetCurves));
    config.days = params.days;
    config.seed = params.seed;
    config.output_dir = "results";
    write_text_file(dir / "run_config.json", serialize_run_config(config));

    const auto distances = bus_distances(synth.feeder);
    double length = 0.0;
    for (const auto& [id, d] : distances) length = std::max(length, d);
    char line[256];
    std::snprintf(line, sizeof line,
                  "buses %zu, segments %zu, regulators %zu, pv systems %zu, length %.2f km, peak load %.1f kW, "
                  "pv penetration %.1f %%\n",
                  synth.feeder.buses.size(), synth.feeder.segments.size(), synth.feeder.regulators.size(),
                  synth.feeder.pv_systems.size(), length, peak_load_kw(synth.feeder),
                  synth.feeder.pv_systems.empty() ? 0.0 : pv_penetration(synth.feeder));
    out << line << "wrote " << (dir / "feeder.json").string() << ", " << (dir / "profiles").string() << "/, "
        << (dir / "run_config.json").string() << '\n';
    return kExitOk;
}

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err) {
    RunConfig config;
    if (args.preset) {
        const fs::path dir = args.out.value_or("preset_run");
        config = preset_matrix_config(dir, args.days.value_or(kPresetDays), args.seed.value_or(1));
        if (config.days < 1) throw ConfigError("--days must be at least 1");
        SyntheticParams params;
        params.days = config.days;
        const SyntheticFeeder synth = generate_synthetic_feeder(params);
        ensure_directory(dir / "input");
        write_text_file(config.feeder, serialize_feeder(synth.feeder));
        write_profile_directory(config.profile_dir, synth.profiles);
    } else {
        if (args.config.empty()) throw ConfigError("run: --config <path> or --preset paper is required");
        config = load_run_config(args.config);
        if (args.seed) config.seed = *args.seed;
        if (args.days) config.days = *args.days;
        if (args.out) config.output_dir = *args.out;
    }
    if (args.jobs) config.jobs = *args.jobs;
    if (args.records) config.write_records = *args.records;
    validate_run_config(config);

    Feeder feeder;
    try {
        feeder = parse_feeder(read_text_file(config.feeder));
        validate_feeder(feeder);
    } catch (const FeederError& e) {
        throw ConfigError(config.feeder + ": " + e.what());
    }
    ProfileSet profiles;
    try {
        profiles = read_profile_directory(config.profile_dir, feeder.pv_systems.size());
        check_profiles(feeder, profiles, config.days);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(config.profile_dir + ": " + e.what());
    }
    std::vector<ScenarioConfig> scenarios;
    try {
        scenarios = sweep_scenarios(config.penetrations, config.si_fractions, config.curves, config.seed);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const Timestamp snapshot = config.snapshot_time.value_or(default_snapshot(profiles, config.days, args.preset));
    const Timestamp span_end = profiles.load.start + static_cast<Timestamp>(config.days) * kDay;
    if (snapshot < profiles.load.start || snapshot >= span_end || (snapshot - profiles.load.start) % profiles.load.step) {
        throw ConfigError("snapshot_time " + format_timestamp(snapshot) + " is not a simulated step");
    }
    const std::size_t snapshot_index = static_cast<std::size_t>((snapshot - profiles.load.start) / profiles.load.step);

    const fs::path out_dir = config.output_dir;
    ensure_directory(out_dir);
    if (config.write_records) ensure_directory(out_dir / "records");

    const std::uint64_t fingerprint = feeder_fingerprint(feeder);
    const unsigned jobs = config.jobs == 0 ? default_jobs(scenarios.size()) : config.jobs;

    std::vector<std::optional<MetricsReport>> summaries(scenarios.size());
    std::vector<std::vector<double>> snapshots(scenarios.size());
    std::vector<std::string> errors(scenarios.size());
    std::mutex mu;

    run_sweep(feeder, profiles, scenarios, config.days, jobs, [&](std::size_t i, SweepResult&& result) {
        std::optional<MetricsReport> summary;
        std::vector<double> snap;
        std::string error = result.error;
        if (error.empty()) {
            try {
                summary = summarize(result.records, result.scenario, config.days, profiles.load.step, fingerprint);
                snap = result.records.at(snapshot_index).voltage;
                if (config.write_records) {
                    write_records(out_dir / "records" / record_file_name(result.scenario), feeder, result.records);
                }
            } catch (const std::exception& e) {
                error = e.what();
            }
        }
        std::lock_guard lock(mu);
        summaries[i] = std::move(summary);
        snapshots[i] = std::move(snap);
        errors[i] = std::move(error);
    });

    // Normalization against the no-SI scenario at the same penetration.
    std::map<double, const MetricsReport*> baselines;
    for (const auto& s : summaries) {
        if (s && s->scenario.si_fraction == 0.0) baselines.emplace(s->scenario.pv_penetration, &*s);
    }
    std::vector<MetricsReport> reports;
    std::vector<ProfileSeries> profile_series;
    bool flagged = false;
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        const ScenarioConfig& s = scenarios[i];
        const std::string label = "pen" + format_number(s.pv_penetration) + "_" + si_label(s.si_fraction, s.curve);
        if (!summaries[i]) {
            err << label << ": failed: " << errors[i] << '\n';
            flagged = true;
            continue;
        }
        MetricsReport r = *summaries[i];
        if (auto it = baselines.find(s.pv_penetration); it != baselines.end()) r = normalize(r, *it->second);
        if (r.flagged_steps > 0) {
            err << label << ": " << r.flagged_steps << " flagged steps\n";
            flagged = true;
        }
        reports.push_back(r);
        profile_series.push_back({si_label(s.si_fraction, s.curve), s.pv_penetration, snapshot,
                                  voltage_profile(feeder, snapshots[i])});
    }

    write_text_file(out_dir / "report.csv", report_csv(reports));
    write_text_file(out_dir / "report.json", report_json(reports));
    write_text_file(out_dir / "fig_max_voltage.csv", plot_max_voltage(reports));
    write_text_file(out_dir / "fig_min_voltage.csv", plot_min_voltage(reports));
    write_text_file(out_dir / "fig_tap_operations.csv", plot_tap_operations(reports));
    write_text_file(out_dir / "fig_line_losses.csv", plot_line_losses(reports));
    write_text_file(out_dir / "fig_variability.csv", plot_variability(reports));
    write_text_file(out_dir / "fig_voltage_profile.csv", plot_voltage_profile(profile_series));

    out << reports.size() << " of " << scenarios.size() << " scenarios written to " << out_dir.string() << '\n';
    return flagged ? kExitFlagged : kExitOk;
}

int cmd_snapshot(const SnapshotArgs& args, std::ostream& out) {
    Feeder feeder;
    try {
        feeder = parse_feeder(read_text_file(args.feeder));
    } catch (const FeederError& e) {
        throw ConfigError(args.feeder + ": " + e.what());
    }
    Timestamp t = 0;
    try {
        t = parse_timestamp(args.time);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("--time: ") + e.what());
    }
    std::vector<ProfileSeries> series;
    for (const auto& file : args.records) {
        const std::string text = read_text_file(file);
        RecordSnapshot snap;
        try {
            snap = read_record_snapshot(text, t);
        } catch (const std::out_of_range& e) {
            throw ConfigError(file + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw ConfigError(file + ": " + e.what());
        }
        std::vector<ProfilePoint> points;
        try {
            points = voltage_profile(feeder, snap);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(file + ": " + e.what());
        }
        series.push_back({fs::path(file).stem().string(), std::nullopt, t, std::move(points)});
    }
    const std::string table = plot_voltage_profile(series);
    if (args.out.empty()) {
        out << table;
    } else {
        write_text_file(args.out, table);
    }
    return kExitOk;
}

}  // namespace

RunConfig parse_run_config(std::string_view text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    RunConfig c;
    c.feeder = field<std::string>(j, "feeder");
    c.profile_dir = field<std::string>(j, "profile_dir");
    c.penetrations = field<std::vector<double>>(j, "penetrations");
    c.si_fractions = field<std::vector<double>>(j, "si_fractions");
    for (const auto& name : field<std::vector<std::string>>(j, "curves")) {
        try {
            c.curves.push_back(parse_curve_choice(name));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    c.days = field<int>(j, "days");
    c.seed = field<std::uint64_t>(j, "seed");
    if (j.contains("output_dir")) c.output_dir = field<std::string>(j, "output_dir");
    if (j.contains("jobs")) c.jobs = field<unsigned>(j, "jobs");
    if (j.contains("snapshot_time") && !j.at("snapshot_time").is_null()) {
        try {
            c.snapshot_time = parse_timestamp(field<std::string>(j, "snapshot_time"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: snapshot_time: ") + e.what());
        }
    }
    if (j.contains("write_records")) c.write_records = field<bool>(j, "write_records");
    return c;
}

std::string serialize_run_config(const RunConfig& c) {
    ordered_json j;
    j["feeder"] = c.feeder;
    j["profile_dir"] = c.profile_dir;
    j["penetrations"] = c.penetrations;
    j["si_fractions"] = c.si_fractions;
    ordered_json curves = ordered_json::array();
    for (CurveChoice curve : c.curves) curves.push_back(std::string(to_string(curve)));
    j["curves"] = std::move(curves);
    j["days"] = c.days;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["jobs"] = c.jobs;
    j["snapshot_time"] = c.snapshot_time ? ordered_json(format_timestamp(*c.snapshot_time)) : ordered_json(nullptr);
    j["write_records"] = c.write_records;
    return j.dump(2) + '\n';
}

RunConfig load_run_config(const fs::path& path) {
    RunConfig c = parse_run_config(read_text_file(path));
    const fs::path base = path.parent_path();
    auto resolve = [&](std::string& p) {
        if (!p.empty() && fs::path(p).is_relative()) p = (base / p).lexically_normal().string();
    };
    resolve(c.feeder);
    resolve(c.profile_dir);
    resolve(c.output_dir);
    return c;
}

void validate_run_config(const RunConfig& c) {
    if (!fs::is_regular_file(c.feeder)) throw ConfigError("config: feeder file '" + c.feeder + "' does not exist");
    if (!fs::is_directory(c.profile_dir)) {
        throw ConfigError("config: profile directory '" + c.profile_dir + "' does not exist");
    }
    if (c.penetrations.empty()) throw ConfigError("config: penetrations must be nonempty");
    if (c.si_fractions.empty()) throw ConfigError("config: si_fractions must be nonempty");
    if (c.si_fractions.size() != c.curves.size()) {
        throw ConfigError("config: si_fractions and curves must have the same length");
    }
    if (c.days < 1) throw ConfigError("config: days must be at least 1");
    if (c.output_dir.empty()) throw ConfigError("config: output_dir must be nonempty");
}

RunConfig preset_matrix_config(const fs::path& output_dir, int days, std::uint64_t seed) {
    RunConfig c;
    c.feeder = (output_dir / "input" / "feeder.json").string();
    c.profile_dir = (output_dir / "input" / "profiles").string();
    c.penetrations.assign(std::begin(kPresetPenetrations), std::end(kPresetPenetrations));
    c.si_fractions.assign(std::begin(kPresetFractions), std::end(kPresetFractions));
    c.curves.assign(std::begin(kPresetCurves), std::end(kPresetCurves));
    c.days = days;
    c.seed = seed;
    c.output_dir = output_dir.string();
    // 48 scenarios over 95 days would need tens of GB of record files.
    c.write_records = false;
    return c;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Quasi-static time-series simulation of PV-rich distribution feeders with smart inverters",
                 "feedersim"};
    app.require_subcommand(1);

    GenerateArgs gen;
    std::string gen_preset;
    auto* generate = app.add_subcommand("generate", "Write the synthetic feeder and its profiles");
    generate->add_option("--preset", gen_preset, "Parameter preset")->check(CLI::IsMember({"paper"}));
    generate->add_option("--pv-count", gen.pv_count, "Number of PV systems");
    generate->add_option("--bus-count", gen.bus_count, "Number of buses");
    generate->add_option("--days", gen.days, "Profile length in days");
    generate->add_option("--seed", gen.seed, "Generator seed");
    generate->add_option("--out", gen.out, "Output directory")->capture_default_str();

    RunArgs run;
    std::string run_preset;
    bool no_records = false;
    bool with_records = false;
    auto* run_cmd = app.add_subcommand("run", "Run a scenario sweep and write reports");
    run_cmd->add_option("--config", run.config, "Run configuration file");
    run_cmd->add_option("--preset", run_preset, "Built-in scenario matrix")->check(CLI::IsMember({"paper"}));
    run_cmd->add_option("--seed", run.seed, "Smart-inverter assignment seed");
    run_cmd->add_option("--days", run.days, "Simulated days");
    run_cmd->add_option("--out", run.out, "Output directory");
    run_cmd->add_option("--jobs", run.jobs, "Worker threads (0: automatic)");
    auto* rec_on = run_cmd->add_flag("--records", with_records, "Write per-scenario record files");
    run_cmd->add_flag("--no-records", no_records, "Skip per-scenario record files")->excludes(rec_on);

    SnapshotArgs snap;
    auto* snapshot = app.add_subcommand("snapshot", "Voltage against distance at one timestamp");
    snapshot->add_option("records", snap.records, "Record files written by 'run'")->required();
    snapshot->add_option("--feeder", snap.feeder, "Feeder file the records belong to")->required();
    snapshot->add_option("--time", snap.time, "Timestamp YYYY-MM-DDTHH:MM:SS")->required();
    snapshot->add_option("--out", snap.out, "Output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*generate) {
            gen.preset = !gen_preset.empty();
            return cmd_generate(gen, out);
        }
        if (*run_cmd) {
            run.preset = !run_preset.empty();
            if (run.preset && !run.config.empty()) throw ConfigError("run: --config and --preset are exclusive");
            if (with_records) run.records = true;
            if (no_records) run.records = false;
            return cmd_run(run, out, err);
        }
        return cmd_snapshot(snap, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

}  // namespace feedersim::cli
