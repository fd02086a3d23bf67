#include "agingsim/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "agingsim/errors.hpp"

namespace agingsim::config {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

const json& child(const json& obj, const char* key) {
    static const json empty = json::object();
    auto it = obj.find(key);
    return (it == obj.end() || it->is_null()) ? empty : *it;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

workload::TokenSource token_source_from(const std::string& s, const std::string& where) {
    if (s == "none") return workload::TokenSource::None;
    if (s == "input") return workload::TokenSource::Input;
    if (s == "output") return workload::TokenSource::Output;
    throw ConfigError(where + ": token_source must be none, input or output");
}

const char* token_source_name(workload::TokenSource s) {
    switch (s) {
        case workload::TokenSource::None: return "none";
        case workload::TokenSource::Input: return "input";
        case workload::TokenSource::Output: return "output";
    }
    return "none";
}

workload::TokenDistribution tokens_from(const json& j, workload::TokenDistribution d, const std::string& where) {
    check_keys(j, {"median", "sigma", "max"}, where);
    d.median = get_or(j, "median", d.median, where);
    d.sigma = get_or(j, "sigma", d.sigma, where);
    d.max = get_or(j, "max", d.max, where);
    return d;
}

json tokens_to(const workload::TokenDistribution& d) {
    return {{"median", d.median}, {"sigma", d.sigma}, {"max", d.max}};
}

}  // namespace

aging::AgingParams aging_from_json(const json& j, aging::AgingParams p) {
    const std::string where = "aging";
    check_keys(j, {"k_fit", "e0", "boltzmann", "b_field", "t_ox", "v_dd", "v_th0", "n_exp", "stress_y", "temperatures_k"},
               where);
    p.k_fit = get_or(j, "k_fit", p.k_fit, where);
    p.e0 = get_or(j, "e0", p.e0, where);
    p.boltzmann = get_or(j, "boltzmann", p.boltzmann, where);
    p.b_field = get_or(j, "b_field", p.b_field, where);
    p.t_ox = get_or(j, "t_ox", p.t_ox, where);
    p.v_dd = get_or(j, "v_dd", p.v_dd, where);
    p.v_th0 = get_or(j, "v_th0", p.v_th0, where);
    p.n_exp = get_or(j, "n_exp", p.n_exp, where);
    p.stress_y = get_or(j, "stress_y", p.stress_y, where);
    const auto& t = child(j, "temperatures_k");
    check_keys(t, {"active_allocated", "active_unallocated", "deep_idle"}, "aging.temperatures_k");
    p.temp_table.active_allocated_k = get_or(t, "active_allocated", p.temp_table.active_allocated_k, where);
    p.temp_table.active_unallocated_k = get_or(t, "active_unallocated", p.temp_table.active_unallocated_k, where);
    p.temp_table.deep_idle_k = get_or(t, "deep_idle", p.temp_table.deep_idle_k, where);
    return p;
}

json aging_to_json(const aging::AgingParams& p) {
    return {{"k_fit", p.k_fit},
            {"e0", p.e0},
            {"boltzmann", p.boltzmann},
            {"b_field", p.b_field},
            {"t_ox", p.t_ox},
            {"v_dd", p.v_dd},
            {"v_th0", p.v_th0},
            {"n_exp", p.n_exp},
            {"stress_y", p.stress_y},
            {"temperatures_k",
             {{"active_allocated", p.temp_table.active_allocated_k},
              {"active_unallocated", p.temp_table.active_unallocated_k},
              {"deep_idle", p.temp_table.deep_idle_k}}}};
}

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
    ExperimentConfig cfg;
    check_keys(doc, {"schema_version", "cluster", "aging", "calibration", "variation", "policies", "reaction",
                     "age_proxy", "linux_weights_csv", "duration_model", "trace", "rates", "seeds",
                     "aging_time_scale", "min_duration_s", "outputs", "carbon", "output_dir"},
               "config");
    const int version = get_or(doc, "schema_version", kSchemaVersion, "config");
    if (version != kSchemaVersion) {
        throw ConfigError("config: unsupported schema_version " + std::to_string(version));
    }

    auto& sim = cfg.sim;
    const auto& cluster = child(doc, "cluster");
    check_keys(cluster, {"machines", "cores_per_vm"}, "cluster");
    const auto machines = get_or<long long>(cluster, "machines", 22, "cluster");
    const auto cores = get_or<long long>(cluster, "cores_per_vm", 40, "cluster");
    if (machines < 1) throw ConfigError("cluster.machines must be >= 1");
    if (cores < 1) throw ConfigError("cluster.cores_per_vm must be >= 1");
    sim.machines = static_cast<std::size_t>(machines);
    sim.cores_per_machine = static_cast<std::size_t>(cores);

    const auto& aging_j = child(doc, "aging");
    sim.aging = aging_from_json(aging_j, {});
    cfg.k_fit_given = aging_j.contains("k_fit") && !aging_j["k_fit"].is_null();

    const auto& cal = child(doc, "calibration");
    check_keys(cal, {"target_drop", "lifetime_years"}, "calibration");
    cfg.calibration.target_drop = get_or(cal, "target_drop", cfg.calibration.target_drop, "calibration");
    cfg.calibration.lifetime_years = get_or(cal, "lifetime_years", cfg.calibration.lifetime_years, "calibration");
    if (!(cfg.calibration.target_drop > 0.0 && cfg.calibration.target_drop < 1.0)) {
        throw ConfigError("calibration.target_drop must lie in (0, 1)");
    }
    if (!(cfg.calibration.lifetime_years > 0.0)) throw ConfigError("calibration.lifetime_years must be > 0");

    const auto& var = child(doc, "variation");
    check_keys(var, {"n_chip", "alpha", "mean_p", "sigma_p", "k_prime"}, "variation");
    const auto n_chip = get_or<long long>(var, "n_chip", 10, "variation");
    if (n_chip < 1) throw ConfigError("variation.n_chip must be >= 1");
    sim.variation.n_chip = static_cast<std::size_t>(n_chip);
    sim.variation.alpha = get_or(var, "alpha", sim.variation.alpha, "variation");
    sim.variation.mean_p = get_or(var, "mean_p", sim.variation.mean_p, "variation");
    sim.variation.sigma_p = get_or(var, "sigma_p", sim.variation.sigma_p, "variation");
    sim.variation.k_prime = get_or(var, "k_prime", sim.variation.k_prime, "variation");

    if (doc.contains("policies")) {
        cfg.policies.clear();
        for (const auto& p : doc["policies"]) {
            if (!p.is_string()) throw ConfigError("policies: expected strings");
            auto kind = engine::policy_from_name(p.get<std::string>());
            if (!kind) throw ConfigError("policies: unknown policy '" + p.get<std::string>() + "'");
            cfg.policies.push_back(*kind);
        }
        if (cfg.policies.empty()) throw ConfigError("policies: at least one policy required");
    }

    const auto& react = child(doc, "reaction");
    check_keys(react, {"pos_gain", "neg_gain", "idling_period_s"}, "reaction");
    sim.reaction.pos_gain = get_or(react, "pos_gain", sim.reaction.pos_gain, "reaction");
    sim.reaction.neg_gain = get_or(react, "neg_gain", sim.reaction.neg_gain, "reaction");
    sim.reaction.idling_period = get_or(react, "idling_period_s", sim.reaction.idling_period, "reaction");

    const auto proxy = get_or<std::string>(doc, "age_proxy", "frequency_deficit", "config");
    auto proxy_kind = engine::age_proxy_from_name(proxy);
    if (!proxy_kind) throw ConfigError("age_proxy must be frequency_deficit or vth_shift");
    sim.age_proxy = *proxy_kind;

    if (auto w = get_or<std::string>(doc, "linux_weights_csv", "", "config"); !w.empty()) {
        cfg.linux_weights_csv = resolve(base_dir, w);
    }

    const auto& dm = child(doc, "duration_model");
    check_keys(dm, {"iteration_interval_s", "tasks"}, "duration_model");
    sim.iteration_interval = get_or(dm, "iteration_interval_s", sim.iteration_interval, "duration_model");
    const auto& tasks = child(dm, "tasks");
    if (!tasks.is_object()) throw ConfigError("duration_model.tasks: expected an object");
    for (const auto& [name, entry] : tasks.items()) {
        auto type = workload::task_type_from_name(name);
        const std::string where = "duration_model.tasks." + name;
        if (!type) throw ConfigError(where + ": unknown task type");
        check_keys(entry, {"base_s", "per_token_s", "token_source"}, where);
        auto cost = sim.durations.cost(*type);
        cost.base = get_or(entry, "base_s", cost.base, where);
        cost.per_token = get_or(entry, "per_token_s", cost.per_token, where);
        cost.token_source =
            token_source_from(get_or<std::string>(entry, "token_source", token_source_name(cost.token_source), where),
                              where);
        sim.durations.set(*type, cost);
    }

    const auto& trace = child(doc, "trace");
    check_keys(trace, {"file", "synthetic"}, "trace");
    if (auto f = get_or<std::string>(trace, "file", "", "trace"); !f.empty()) cfg.trace_file = resolve(base_dir, f);
    const auto& syn = child(trace, "synthetic");
    check_keys(syn, {"duration_s", "input_tokens", "output_tokens"}, "trace.synthetic");
    cfg.synthetic.duration = get_or(syn, "duration_s", 60.0, "trace.synthetic");
    cfg.synthetic.input = tokens_from(child(syn, "input_tokens"), cfg.synthetic.input, "trace.synthetic.input_tokens");
    cfg.synthetic.output =
        tokens_from(child(syn, "output_tokens"), cfg.synthetic.output, "trace.synthetic.output_tokens");

    cfg.rates = get_or(doc, "rates", cfg.rates, "config");
    cfg.seeds = get_or(doc, "seeds", cfg.seeds, "config");
    if (cfg.rates.empty()) throw ConfigError("rates: at least one rate required");
    if (cfg.seeds.empty()) throw ConfigError("seeds: at least one seed required");
    for (double r : cfg.rates) {
        if (!(r > 0.0)) throw ConfigError("rates must be positive");
    }

    sim.aging_time_scale = get_or(doc, "aging_time_scale", sim.aging_time_scale, "config");
    sim.min_duration = get_or(doc, "min_duration_s", sim.min_duration, "config");

    const auto& out = child(doc, "outputs");
    check_keys(out, {"event_log", "samples", "idling_debug"}, "outputs");
    cfg.outputs.event_log = get_or(out, "event_log", cfg.outputs.event_log, "outputs");
    cfg.outputs.samples = get_or(out, "samples", cfg.outputs.samples, "outputs");
    cfg.outputs.idling_debug = get_or(out, "idling_debug", cfg.outputs.idling_debug, "outputs");
    sim.record_events = cfg.outputs.event_log;
    sim.record_samples = cfg.outputs.samples;
    sim.record_idling = cfg.outputs.idling_debug;

    const auto& carbon = child(doc, "carbon");
    check_keys(carbon, {"base_lifetime_years", "cpu_embodied_kg"}, "carbon");
    cfg.carbon.base_lifetime = get_or(carbon, "base_lifetime_years", cfg.carbon.base_lifetime, "carbon");
    cfg.carbon.cpu_embodied = get_or(carbon, "cpu_embodied_kg", cfg.carbon.cpu_embodied, "carbon");
    cfg.carbon.machines = static_cast<double>(sim.machines);

    cfg.output_dir = resolve(base_dir, get_or<std::string>(doc, "output_dir", "runs", "config"));

    // Everything except k_fit, which calibration may still fill in.
    aging::AgingParams uncalibrated = sim.aging;
    if (!cfg.k_fit_given) uncalibrated.k_fit = 0.0;
    uncalibrated.validate();
    sim.variation.validate();
    sim.reaction.validate();
    sim.durations.validate();
    cfg.carbon.validate();
    if (!(sim.aging_time_scale > 0.0)) throw ConfigError("aging_time_scale must be positive");
    if (!(sim.min_duration >= 0.0)) throw ConfigError("min_duration_s must be >= 0");
    if (!(sim.iteration_interval >= 0.0)) throw ConfigError("duration_model.iteration_interval_s must be >= 0");
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return parse_config(doc, path.parent_path());
}

json to_json(const ExperimentConfig& cfg) {
    const auto& sim = cfg.sim;
    json policies = json::array();
    for (auto p : cfg.policies) policies.push_back(std::string(engine::policy_name(p)));
    json tasks = json::object();
    for (std::size_t k = 0; k < workload::kTaskTypeCount; ++k) {
        const auto type = static_cast<workload::TaskType>(k);
        const auto& c = sim.durations.cost(type);
        tasks[std::string(workload::task_type_name(type))] = {
            {"base_s", c.base}, {"per_token_s", c.per_token}, {"token_source", token_source_name(c.token_source)}};
    }
    json aging_j = aging_to_json(sim.aging);
    if (!cfg.k_fit_given) aging_j["k_fit"] = nullptr;
    return {
        {"schema_version", kSchemaVersion},
        {"cluster", {{"machines", sim.machines}, {"cores_per_vm", sim.cores_per_machine}}},
        {"aging", aging_j},
        {"calibration",
         {{"target_drop", cfg.calibration.target_drop}, {"lifetime_years", cfg.calibration.lifetime_years}}},
        {"variation",
         {{"n_chip", sim.variation.n_chip},
          {"alpha", sim.variation.alpha},
          {"mean_p", sim.variation.mean_p},
          {"sigma_p", sim.variation.sigma_p},
          {"k_prime", sim.variation.k_prime}}},
        {"policies", policies},
        {"reaction",
         {{"pos_gain", sim.reaction.pos_gain},
          {"neg_gain", sim.reaction.neg_gain},
          {"idling_period_s", sim.reaction.idling_period}}},
        {"age_proxy", std::string(engine::age_proxy_name(sim.age_proxy))},
        {"linux_weights_csv", cfg.linux_weights_csv ? json(cfg.linux_weights_csv->string()) : json(nullptr)},
        {"duration_model", {{"iteration_interval_s", sim.iteration_interval}, {"tasks", tasks}}},
        {"trace",
         {{"file", cfg.trace_file ? json(cfg.trace_file->string()) : json(nullptr)},
          {"synthetic",
           {{"duration_s", cfg.synthetic.duration},
            {"input_tokens", tokens_to(cfg.synthetic.input)},
            {"output_tokens", tokens_to(cfg.synthetic.output)}}}}},
        {"rates", cfg.rates},
        {"seeds", cfg.seeds},
        {"aging_time_scale", sim.aging_time_scale},
        {"min_duration_s", sim.min_duration},
        {"outputs",
         {{"event_log", cfg.outputs.event_log},
          {"samples", cfg.outputs.samples},
          {"idling_debug", cfg.outputs.idling_debug}}},
        {"carbon",
         {{"base_lifetime_years", cfg.carbon.base_lifetime}, {"cpu_embodied_kg", cfg.carbon.cpu_embodied}}},
        {"output_dir", cfg.output_dir.string()},
    };
}

std::string config_hash(const ExperimentConfig& cfg) {
    // The output location does not change what a run computes.
    json doc = to_json(cfg);
    doc.erase("output_dir");
    const std::string text = doc.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace agingsim::config
