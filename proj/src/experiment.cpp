#include "agingsim/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include "agingsim/baselines.hpp"
#include "agingsim/csv.hpp"
#include "agingsim/errors.hpp"
#include "agingsim/metrics.hpp"

namespace agingsim::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

CalibrationResult calibrate(const config::ExperimentConfig& cfg) {
    CalibrationResult r;
    r.params = cfg.sim.aging;
    const double lifetime_s = cfg.calibration.lifetime_years * aging::kSecondsPerYear;
    r.params.k_fit = aging::calibrate_k(cfg.calibration.target_drop, lifetime_s, r.params);

    aging::CoreAging probe;
    probe.f0 = 1.0;
    aging::apply_state_interval(probe, aging::CoreState::ActiveAllocated, lifetime_s, r.params);
    r.verified_drop = 1.0 - aging::core_frequency(probe, r.params);
    r.relative_error = std::abs(r.verified_drop - cfg.calibration.target_drop) / cfg.calibration.target_drop;
    return r;
}

json calibration_json(const config::ExperimentConfig& cfg, const CalibrationResult& result) {
    return {
        {"schema_version", config::kSchemaVersion},
        {"config_hash", config::config_hash(cfg)},
        {"aging", config::aging_to_json(result.params)},
        {"calibration",
         {{"target_drop", cfg.calibration.target_drop},
          {"lifetime_years", cfg.calibration.lifetime_years},
          {"lifetime_s", cfg.calibration.lifetime_years * aging::kSecondsPerYear}}},
        {"verification", {{"drop", result.verified_drop}, {"relative_error", result.relative_error}}},
    };
}

config::ExperimentConfig with_calibration(config::ExperimentConfig cfg, const std::optional<fs::path>& params_file) {
    if (cfg.k_fit_given) return cfg;
    if (params_file) {
        std::ifstream in(*params_file);
        if (!in) throw ConfigError("cannot read calibrated params " + params_file->string());
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError("params " + params_file->string() + ": " + e.what());
        }
        if (!doc.contains("aging")) throw ConfigError("params file has no 'aging' block");
        cfg.sim.aging = config::aging_from_json(doc["aging"], cfg.sim.aging);
        if (!(cfg.sim.aging.k_fit > 0.0)) throw ConfigError("params file carries no positive k_fit");
        cfg.k_fit_given = true;
        return cfg;
    }
    cfg.sim.aging = calibrate(cfg).params;
    return cfg;
}

std::string Cell::name() const {
    std::string out(engine::policy_name(policy));
    out += rate ? "_rate" + csv::format_double(*rate) : "_trace";
    out += "_seed" + std::to_string(seed);
    return out;
}

std::vector<Cell> matrix(const config::ExperimentConfig& cfg, std::uint64_t seed_offset) {
    std::vector<Cell> cells;
    std::vector<std::optional<double>> rates;
    if (cfg.trace_file) {
        rates.push_back(std::nullopt);
    } else {
        for (double r : cfg.rates) rates.push_back(r);
    }
    for (const auto& rate : rates) {
        for (auto seed : cfg.seeds) {
            for (auto policy : cfg.policies) cells.push_back({policy, rate, seed + seed_offset});
        }
    }
    return cells;
}

std::vector<workload::Request> synthetic_trace(const config::ExperimentConfig& cfg, double rate, std::uint64_t seed) {
    auto params = cfg.synthetic;
    params.rate = rate;
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x7472u};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return workload::generate_synthetic_trace(params, (static_cast<std::uint64_t>(out[0]) << 32) | out[1]);
}

Inputs load_inputs(const config::ExperimentConfig& cfg) {
    Inputs inputs;
    if (cfg.trace_file) {
        std::ifstream in(*cfg.trace_file);
        if (!in) throw ConfigError("cannot read trace file " + cfg.trace_file->string());
        try {
            inputs.trace = workload::parse_trace(in);
        } catch (const ParseError& e) {
            throw ConfigError("trace " + cfg.trace_file->string() + ": " + e.what());
        }
    }
    if (cfg.linux_weights_csv) {
        std::ifstream in(*cfg.linux_weights_csv);
        if (!in) throw ConfigError("cannot read linux weights " + cfg.linux_weights_csv->string());
        try {
            inputs.linux_weights = baselines::read_linux_weights(in, cfg.sim.cores_per_machine);
        } catch (const ParseError& e) {
            throw ConfigError("linux weights " + cfg.linux_weights_csv->string() + ": " + e.what());
        }
    }
    return inputs;
}

engine::SimConfig cell_config(const config::ExperimentConfig& cfg, const Inputs& inputs, const Cell& cell) {
    engine::SimConfig sim = cfg.sim;
    sim.policy = cell.policy;
    sim.linux_weights = inputs.linux_weights;
    return sim;
}

engine::RunResult run_cell(const config::ExperimentConfig& cfg, const Inputs& inputs, const Cell& cell) {
    const auto sim = cell_config(cfg, inputs, cell);
    if (inputs.trace) return engine::run_simulation(sim, *inputs.trace, cell.seed);
    return engine::run_simulation(sim, synthetic_trace(cfg, *cell.rate, cell.seed), cell.seed);
}

namespace {

void write_file(const fs::path& path, const auto& writer) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    writer(out);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string machine_file(std::size_t id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "machine_%03zu.csv", id);
    return buf;
}

}  // namespace

void write_run(const fs::path& dir, const config::ExperimentConfig& cfg, const Cell& cell,
               const engine::RunResult& result) {
    fs::create_directories(dir / "cores");
    for (const auto& m : result.machines) {
        write_file(dir / "cores" / machine_file(m.machine_id), [&m](std::ostream& o) { engine::write_core_csv(o, m); });
    }
    if (cfg.outputs.samples) {
        write_file(dir / "samples.csv", [&result](std::ostream& o) { engine::write_samples_csv(o, result.samples); });
    }
    if (cfg.outputs.event_log) {
        write_file(dir / "events.csv", [&result](std::ostream& o) { engine::write_event_log_csv(o, result.events); });
    }
    if (cfg.outputs.idling_debug) {
        write_file(dir / "idling.csv", [&result](std::ostream& o) { engine::write_idling_csv(o, result.idling); });
    }
    json meta = {
        {"policy", std::string(engine::policy_name(cell.policy))},
        {"rate", cell.rate ? json(*cell.rate) : json("trace")},
        {"seed", cell.seed},
        {"config_hash", config::config_hash(cfg)},
        {"end_time_s", result.end_time},
        {"arrived_tasks", result.arrived_tasks},
        {"completed_tasks", result.completed_tasks},
        {"machines", cfg.sim.machines},
        {"cores_per_vm", cfg.sim.cores_per_machine},
        {"carbon",
         {{"base_lifetime_years", cfg.carbon.base_lifetime},
          {"cpu_embodied_kg", cfg.carbon.cpu_embodied},
          {"machines", cfg.carbon.machines}}},
    };
    write_file(dir / "run.json", [&meta](std::ostream& o) { o << meta.dump(2) << '\n'; });
}

std::vector<fs::path> simulate(const config::ExperimentConfig& cfg, const fs::path& out_dir, std::size_t parallel,
                               std::uint64_t seed_offset) {
    const Inputs inputs = load_inputs(cfg);
    if (!(cfg.sim.aging.k_fit > 0.0)) throw ConfigError("simulate: aging parameters are not calibrated");
    cfg.sim.validate();

    const auto cells = matrix(cfg, seed_offset);
    fs::create_directories(out_dir);
    write_file(out_dir / "config.json", [&cfg](std::ostream& o) { o << config::to_json(cfg).dump(2) << '\n'; });

    std::vector<fs::path> dirs;
    for (const auto& c : cells) dirs.push_back(out_dir / c.name());
    std::vector<std::string> errors(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t k = next++; k < cells.size(); k = next++) {
            try {
                auto result = run_cell(cfg, inputs, cells[k]);
                write_run(dirs[k], cfg, cells[k], result);
            } catch (const std::exception& e) {
                errors[k] = e.what();
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(parallel, 1, cells.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (!errors[k].empty()) throw RunFailure("cell " + cells[k].name() + " failed: " + errors[k]);
    }
    return dirs;
}

// ---------------------------------------------------------------------------

namespace {

struct CoreRow {
    double f0, frequency;
};

std::vector<CoreRow> read_cores(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<std::string> header;
    std::size_t line = 0;
    if (!csv::read_header(in, header, line) ||
        header != std::vector<std::string>{"core_id", "f0", "vth_shift", "frequency"}) {
        throw ParseError(line, path.string() + ": unexpected header");
    }
    std::vector<CoreRow> rows;
    csv::Row row;
    while (csv::next_row(in, row, line)) {
        if (row.fields.size() != 4) throw ParseError(row.line, path.string() + ": expected 4 fields");
        rows.push_back({csv::to_double(row.fields[1], row.line), csv::to_double(row.fields[3], row.line)});
    }
    return rows;
}

struct SampleStats {
    std::map<double, std::uint64_t> idle_counts;
    double oversubscription = 0.0;
};

SampleStats read_samples(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<std::string> header;
    std::size_t line = 0;
    if (!csv::read_header(in, header, line) ||
        header != std::vector<std::string>{"t", "machine", "n_total", "n_idle", "n_running"}) {
        throw ParseError(line, path.string() + ": unexpected header");
    }
    SampleStats stats;
    std::map<std::uint32_t, metrics::MetricSample> last;
    csv::Row row;
    while (csv::next_row(in, row, line)) {
        if (row.fields.size() != 5) throw ParseError(row.line, path.string() + ": expected 5 fields");
        metrics::MetricSample s;
        s.t = csv::to_double(row.fields[0], row.line);
        s.machine = static_cast<std::uint32_t>(csv::to_integer(row.fields[1], row.line));
        s.n_total = static_cast<std::uint32_t>(csv::to_integer(row.fields[2], row.line));
        s.n_idle = static_cast<std::uint32_t>(csv::to_integer(row.fields[3], row.line));
        s.n_running = static_cast<std::uint32_t>(csv::to_integer(row.fields[4], row.line));
        ++stats.idle_counts[metrics::normalized_idle(s)];
        if (auto it = last.find(s.machine); it != last.end()) {
            const metrics::MetricSample pair[2] = {it->second, s};
            stats.oversubscription += metrics::oversubscription_integral(pair, s.machine);
            it->second = s;
        } else {
            last.emplace(s.machine, s);
        }
    }
    return stats;
}

}  // namespace

RunMetrics load_run_metrics(const fs::path& run_dir) {
    std::ifstream in(run_dir / "run.json");
    if (!in) throw std::runtime_error("cannot read " + (run_dir / "run.json").string());
    const json meta = json::parse(in);
    RunMetrics r;
    r.policy = meta.at("policy").get<std::string>();
    r.rate = meta.at("rate").is_string() ? meta.at("rate").get<std::string>()
                                         : csv::format_double(meta.at("rate").get<double>());
    r.seed = meta.at("seed").get<std::uint64_t>();
    r.config_hash = meta.at("config_hash").get<std::string>();

    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(run_dir / "cores")) {
        if (e.path().extension() == ".csv") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        const auto rows = read_cores(f);
        std::vector<double> f0s, freqs;
        for (const auto& row : rows) {
            f0s.push_back(row.f0);
            freqs.push_back(row.frequency);
        }
        r.machine_cv.push_back(metrics::frequency_cv(freqs));
        r.machine_degradation.push_back(metrics::mean_degradation(f0s, freqs));
    }
    if (fs::exists(run_dir / "samples.csv")) {
        auto stats = read_samples(run_dir / "samples.csv");
        r.has_samples = true;
        r.oversubscription = stats.oversubscription;
        for (const auto& [v, n] : stats.idle_counts) r.normalized_idle.insert(r.normalized_idle.end(), n, v);
    }
    return r;
}

namespace {

const std::vector<std::string> kPolicyOrder = {"proposed", "linux", "least_aged"};

struct Group {
    std::vector<double> cv;
    std::vector<double> degradation;
    std::map<double, std::uint64_t> idle_counts;
    double oversubscription = 0.0;
    std::size_t runs = 0;
    std::vector<std::uint64_t> seeds;
    bool has_samples = true;
};

bool rate_less(const std::string& a, const std::string& b) {
    double x = 0, y = 0;
    const bool na = std::from_chars(a.data(), a.data() + a.size(), x).ec == std::errc();
    const bool nb = std::from_chars(b.data(), b.data() + b.size(), y).ec == std::errc();
    if (na && nb) return x < y;
    if (na != nb) return na;
    return a < b;
}

}  // namespace

json report(const fs::path& artifacts_dir, const fs::path& out_dir) {
    std::vector<fs::path> runs;
    if (fs::is_directory(artifacts_dir)) {
        for (const auto& e : fs::directory_iterator(artifacts_dir)) {
            if (e.is_directory() && fs::exists(e.path() / "run.json")) runs.push_back(e.path());
        }
    }
    if (runs.empty()) throw ConfigError("no completed runs under " + artifacts_dir.string());
    std::sort(runs.begin(), runs.end());

    std::map<std::string, std::map<std::string, Group>> groups;  // rate -> policy
    std::set<std::string> hashes;
    json carbon_meta;
    for (const auto& dir : runs) {
        auto r = load_run_metrics(dir);
        std::ifstream meta_in(dir / "run.json");
        const json meta = json::parse(meta_in);
        carbon_meta = meta.at("carbon");
        hashes.insert(r.config_hash);
        auto& g = groups[r.rate][r.policy];
        g.cv.insert(g.cv.end(), r.machine_cv.begin(), r.machine_cv.end());
        g.degradation.insert(g.degradation.end(), r.machine_degradation.begin(), r.machine_degradation.end());
        for (double v : r.normalized_idle) ++g.idle_counts[v];
        g.oversubscription += r.oversubscription;
        g.has_samples = g.has_samples && r.has_samples;
        g.seeds.push_back(r.seed);
        ++g.runs;
    }
    metrics::CarbonParams carbon;
    carbon.base_lifetime = carbon_meta.at("base_lifetime_years").get<double>();
    carbon.cpu_embodied = carbon_meta.at("cpu_embodied_kg").get<double>();
    carbon.machines = carbon_meta.at("machines").get<double>();

    std::vector<std::string> rates;
    for (const auto& [rate, _] : groups) rates.push_back(rate);
    std::sort(rates.begin(), rates.end(), rate_less);
    std::vector<std::string> policies;
    for (const auto& p : kPolicyOrder) {
        for (const auto& [_, by_policy] : groups) {
            if (by_policy.count(p)) {
                policies.push_back(p);
                break;
            }
        }
    }

    const std::vector<std::pair<std::string, double>> pcts = {{"p1", 1}, {"p50", 50}, {"p90", 90}, {"p99", 99}};
    fs::create_directories(out_dir);
    std::ofstream cv_csv(out_dir / "frequency_cv.csv"), deg_csv(out_dir / "mean_degradation.csv"),
        idle_csv(out_dir / "normalized_idle.csv"), over_csv(out_dir / "oversubscription.csv"),
        carbon_csv(out_dir / "carbon.csv");
    for (auto* f : {&cv_csv, &deg_csv, &idle_csv}) {
        *f << (f == &idle_csv ? "rate,statistic" : "rate,percentile");
        for (const auto& p : policies) *f << ',' << p;
        *f << '\n';
    }
    over_csv << "rate,statistic";
    for (const auto& p : policies) over_csv << ',' << p;
    over_csv << '\n';
    carbon_csv << "rate,percentile,policy,degradation,ratio,lifetime_years,yearly_kgco2eq,reduction\n";

    json summary = {{"config_hashes", json(std::vector<std::string>(hashes.begin(), hashes.end()))},
                    {"runs", runs.size()},
                    {"rates", json::object()}};
    auto cell = [](std::ostream& o, const std::optional<double>& v) {
        o << ',';
        if (v) o << csv::format_double(*v);
    };

    for (const auto& rate : rates) {
        auto& by_policy = groups[rate];
        json rate_j = json::object();
        for (const auto& p : policies) {
            if (!by_policy.count(p)) continue;
            auto& g = by_policy[p];
            json pj = {{"runs", g.runs}, {"seeds", g.seeds}};
            for (const auto& [label, q] : pcts) {
                pj["frequency_cv"][label] = metrics::percentile(g.cv, q);
                pj["mean_degradation"][label] = metrics::percentile(g.degradation, q);
            }
            if (g.has_samples && !g.idle_counts.empty()) {
                pj["normalized_idle"] = {{"p1", metrics::percentile(g.idle_counts, 1)},
                                         {"p50", metrics::percentile(g.idle_counts, 50)},
                                         {"p90", metrics::percentile(g.idle_counts, 90)},
                                         {"min", g.idle_counts.begin()->first}};
                pj["oversubscription_below_10pct"] = g.idle_counts.begin()->first >= -0.1;
                pj["oversubscription_task_s_per_run"] = g.oversubscription / static_cast<double>(g.runs);
            }
            rate_j[p] = pj;
        }

        for (const auto& [label, q] : pcts) {
            cv_csv << rate << ',' << label;
            deg_csv << rate << ',' << label;
            for (const auto& p : policies) {
                cell(cv_csv, rate_j.contains(p) ? std::optional(rate_j[p]["frequency_cv"][label].get<double>())
                                                : std::nullopt);
                cell(deg_csv, rate_j.contains(p)
                                  ? std::optional(rate_j[p]["mean_degradation"][label].get<double>())
                                  : std::nullopt);
            }
            cv_csv << '\n';
            deg_csv << '\n';
        }
        for (const char* stat : {"p1", "p50", "p90", "min"}) {
            idle_csv << rate << ',' << stat;
            for (const auto& p : policies) {
                const bool has = rate_j.contains(p) && rate_j[p].contains("normalized_idle");
                cell(idle_csv, has ? std::optional(rate_j[p]["normalized_idle"][stat].get<double>()) : std::nullopt);
            }
            idle_csv << '\n';
        }
        over_csv << rate << ",task_s_per_run";
        for (const auto& p : policies) {
            const bool has = rate_j.contains(p) && rate_j[p].contains("oversubscription_task_s_per_run");
            cell(over_csv,
                 has ? std::optional(rate_j[p]["oversubscription_task_s_per_run"].get<double>()) : std::nullopt);
        }
        over_csv << '\n';

        // Carbon against linux at matching degradation percentiles.
        if (rate_j.contains("linux")) {
            for (const char* label : {"p50", "p99"}) {
                const double deg_linux = rate_j["linux"]["mean_degradation"][label].get<double>();
                for (const auto& p : policies) {
                    if (!rate_j.contains(p)) continue;
                    const double deg = rate_j[p]["mean_degradation"][label].get<double>();
                    try {
                        const auto est = metrics::estimate_yearly_embodied(deg, deg_linux, carbon);
                        rate_j[p]["carbon"][label] = {{"degradation", deg},
                                                      {"ratio", est.ratio},
                                                      {"lifetime_years", est.lifetime},
                                                      {"yearly_kgco2eq", est.yearly},
                                                      {"reduction", est.reduction}};
                        carbon_csv << rate << ',' << label << ',' << p << ',' << csv::format_double(deg) << ','
                                   << csv::format_double(est.ratio) << ',' << csv::format_double(est.lifetime) << ','
                                   << csv::format_double(est.yearly) << ',' << csv::format_double(est.reduction)
                                   << '\n';
                    } catch (const std::domain_error&) {
                        rate_j[p]["carbon"][label] = "no measurable aging";
                        carbon_csv << rate << ',' << label << ',' << p << ',' << csv::format_double(deg)
                                   << ",,,,\n";
                    }
                }
            }
        }
        summary["rates"][rate] = rate_j;
    }
    std::ofstream(out_dir / "summary.json") << summary.dump(2) << '\n';
    return summary;
}

}  // namespace agingsim::experiment
