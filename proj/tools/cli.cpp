#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>

#include <CLI11.hpp>

#include "collapse/bayes.hpp"
#include "collapse/bloch.hpp"
#include "collapse/sde.hpp"
#include "collapse/stats.hpp"

namespace collapse::cli {

using nlohmann::json;

namespace {

constexpr const char* kThreadsEnv = "COLLAPSE_SIM_THREADS";

void merge_into(json& base, const json& patch, const std::string& where) {
    if (!patch.is_object()) {
        throw ConfigError("config" + where + " must be a JSON object");
    }
    for (const auto& [key, value] : patch.items()) {
        const std::string path = where.empty() ? key : where + "." + key;
        if (!base.contains(key)) {
            throw ConfigError("unknown config key '" + path + "'");
        }
        if (base[key].is_object()) {
            merge_into(base[key], value, path);
        } else {
            base[key] = value;
        }
    }
}

template <class T>
T get(const json& config, const std::string& key) {
    try {
        return config.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
    }
}

std::uint64_t get_count(const json& config, const std::string& key, std::uint64_t min_value) {
    const json& value = config.at(key);
    if (!value.is_number_integer() || value.get<std::int64_t>() < static_cast<std::int64_t>(min_value)) {
        throw ConfigError("config key '" + key + "' must be an integer >= " + std::to_string(min_value));
    }
    return value.get<std::uint64_t>();
}

std::vector<std::size_t> get_sizes(const json& config, const std::string& key) {
    const auto raw = get<std::vector<std::int64_t>>(config, key);
    std::vector<std::size_t> out;
    for (auto n : raw) {
        if (n < 1) {
            throw ConfigError("config key '" + key + "' must hold positive integers");
        }
        out.push_back(static_cast<std::size_t>(n));
    }
    return out;
}

std::uint64_t realizations_of(const json& config) {
    return get_count(config, "realizations", 1);
}

class CsvWriter {
  public:
    explicit CsvWriter(const std::filesystem::path& path) : file_(path, std::ios::binary) {
        if (!file_) {
            throw ConfigError("cannot open " + path.string() + " for writing");
        }
    }

    void header(const std::vector<std::string>& columns) {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            file_ << (i ? "," : "") << columns[i];
        }
        file_ << '\n';
    }

    CsvWriter& cell(double x) { return raw(format_number(x)); }
    CsvWriter& cell(std::uint64_t x) { return raw(std::to_string(x)); }
    CsvWriter& cell(const std::string& s) { return raw(s); }

    void end_row() {
        file_ << '\n';
        first_ = true;
    }

  private:
    CsvWriter& raw(const std::string& s) {
        file_ << (first_ ? "" : ",") << s;
        first_ = false;
        return *this;
    }

    std::ofstream file_;
    bool first_ = true;
};

void write_json(const std::filesystem::path& path, json doc) {
    doc["schema_version"] = kSchemaVersion;
    std::ofstream file(path, std::ios::binary);
    if (!file) {
        throw ConfigError("cannot open " + path.string() + " for writing");
    }
    file << doc.dump(2) << '\n';
}

/// JSON cannot hold infinities; store them as null.
json finite_or_null(double x) {
    return std::isfinite(x) ? json(x) : json(nullptr);
}

struct Invocation {
    json config;
    std::filesystem::path out_dir;
    unsigned threads = 1;
};

int cmd_trajectory(const Invocation& inv, std::ostream& out) {
    const SimParams params = sim_params_from(inv.config);
    if (!params.record_path) {
        throw ConfigError("trajectory requires record_path = true");
    }
    const auto index = get_count(inv.config["trajectory"], "index", 0);
    RandomStream stream = derive_stream(params.master_seed, index);
    const TrajectoryResult result = run_trajectory(params, stream, init_uniform(params.n_sites));

    CsvWriter csv(inv.out_dir / "trajectory.csv");
    std::vector<std::string> columns{"t"};
    for (std::size_t n = 1; n <= params.n_sites; ++n) {
        columns.push_back("U" + std::to_string(n));
    }
    csv.header(columns);
    for (const auto& sample : result.path) {
        csv.cell(sample.t);
        for (double v : sample.v) {
            csv.cell(v - 1.0);
        }
        csv.end_row();
    }

    json summary{{"n_sites", params.n_sites},
                 {"steps_taken", result.steps_taken},
                 {"collapse_time", result.collapse_time ? json(*result.collapse_time) : json(nullptr)},
                 {"winner", result.winner ? json(*result.winner) : json(nullptr)}};
    write_json(inv.out_dir / "trajectory.json", summary);
    out << "trajectory: " << (result.collapsed() ? "collapsed" : "horizon exceeded") << " after "
        << result.steps_taken << " steps\n";
    return kExitOk;
}

int cmd_sweep(const Invocation& inv, std::ostream& out) {
    SimParams params = sim_params_from(inv.config);
    const json& block = inv.config["sweep"];
    const auto n_list = get_sizes(block, "n_list");
    const std::uint64_t m = realizations_of(inv.config);
    const auto n_min = static_cast<std::size_t>(get_count(block, "n_min", 3));
    if (n_list.empty()) {
        throw ConfigError("sweep.n_list must not be empty");
    }

    SweepTable table;
    try {
        table = scaling_sweep(n_list, params, m, inv.threads);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    CsvWriter csv(inv.out_dir / "sweep.csv");
    csv.header({"N", "mean_time", "stderr", "realizations", "exceeded"});
    for (const auto& row : table) {
        csv.cell(static_cast<std::uint64_t>(row.n_sites))
            .cell(row.stats.mean_time)
            .cell(row.stats.stderr_time)
            .cell(row.stats.realizations)
            .cell(row.stats.horizon_exceeded);
        csv.end_row();
    }

    json fit_doc{{"noise_kind", std::string(to_string(params.noise_kind))}, {"n_min", n_min}};
    try {
        const FitResult fit = fit_lnln(table, n_min);
        fit_doc["a"] = fit.slope;
        fit_doc["b"] = fit.intercept;
        fit_doc["r_squared"] = fit.r_squared;
        fit_doc["slope_stderr"] = fit.slope_stderr;
        fit_doc["rows_used"] = fit.rows_used;
        out << "sweep: T = " << format_number(fit.slope) << " ln ln N + "
            << format_number(fit.intercept) << ", R^2 = " << format_number(fit.r_squared) << "\n";
    } catch (const std::invalid_argument& e) {
        fit_doc["a"] = nullptr;
        fit_doc["b"] = nullptr;
        fit_doc["r_squared"] = nullptr;
        fit_doc["error"] = e.what();
        out << "sweep: no fit (" << e.what() << ")\n";
    }
    write_json(inv.out_dir / "fit.json", fit_doc);

    if (get<bool>(block, "initial_step")) {
        const double horizon = get<double>(block, "initial_step_horizon");
        std::vector<InitialStepRow> rows;
        try {
            rows = initial_step_experiment(n_list, params, m, horizon, inv.threads);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        CsvWriter steps(inv.out_dir / "initial_step.csv");
        steps.header({"N", "mean_running_max", "stderr", "realizations"});
        for (const auto& row : rows) {
            steps.cell(static_cast<std::uint64_t>(row.n_sites))
                .cell(row.mean_running_max)
                .cell(row.stderr_running_max)
                .cell(row.realizations);
            steps.end_row();
        }
    }
    return kExitOk;
}

int cmd_bayes(const Invocation& inv, std::ostream& out) {
    const SimParams params = sim_params_from(inv.config);
    const json& block = inv.config["bayes"];
    auto weights = get<std::vector<double>>(block, "weights");
    const double t = get<double>(block, "t");
    const double tau_m = get<double>(block, "tau_m");
    const std::uint64_t m = realizations_of(inv.config);

    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) {
            throw ConfigError("bayes.weights must be nonnegative");
        }
        total += w;
    }
    if (weights.empty() || !(total > 0.0)) {
        throw ConfigError("bayes.weights must contain a positive entry");
    }
    if (!(t >= 0.0) || !(tau_m > 0.0)) {
        throw ConfigError("bayes.t must be >= 0 and bayes.tau_m > 0");
    }
    for (double& w : weights) {
        w /= total;
    }
    const BornFrequencies born = born_frequencies(amplitudes_from_probabilities(weights), t, tau_m, m,
                                                  params.master_seed, inv.threads);

    CsvWriter csv(inv.out_dir / "bayes.csv");
    csv.header({"site", "weight", "count", "frequency", "binomial_stderr", "z_score"});
    double max_abs_z = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        const double p = weights[k];
        const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(m));
        const double diff = born.frequencies[k] - p;
        const double z = se > 0.0 ? diff / se
                                  : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
        max_abs_z = std::max(max_abs_z, std::abs(z));
        csv.cell(static_cast<std::uint64_t>(k)).cell(p).cell(born.counts[k]).cell(born.frequencies[k]).cell(se).cell(z);
        csv.end_row();
    }
    json summary{{"realizations", m},
                 {"unresolved", born.unresolved},
                 {"t", t},
                 {"tau_m", tau_m},
                 {"max_abs_z", finite_or_null(max_abs_z)},
                 {"within_5_stderr", max_abs_z <= 5.0}};
    write_json(inv.out_dir / "bayes.json", summary);
    out << "bayes: max |z| = " << format_number(max_abs_z) << ", unresolved = " << born.unresolved
        << "\n";
    return kExitOk;
}

int cmd_bloch(const Invocation& inv, std::ostream& out) {
    const SimParams params = sim_params_from(inv.config);
    const json& block = inv.config["bloch"];
    PurityTraceOptions options;
    options.noise_kind = params.noise_kind;
    options.dt = params.dt;
    options.steps = get_count(block, "steps", 0);
    options.sample_every = get_count(block, "sample_every", 1);
    options.realizations = get_count(inv.config, "realizations", 2);
    options.seed = params.master_seed;
    options.threads = inv.threads;

    const StateVector start = init_uniform(params.n_sites);
    BlochEnsemble initial;
    try {
        initial = bloch_from_state(start, get<double>(block, "energy"), get<double>(block, "tunneling"),
                                   get<double>(block, "tau_m"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto rows = purity_trace(initial, options);

    CsvWriter csv(inv.out_dir / "bloch.csv");
    csv.header({"step", "t", "qubit", "mean_purity", "stderr_purity", "mean_window_change",
                "stderr_window_change", "mean_step_change", "mean_expected_change",
                "mean_change_residual", "stderr_change_residual"});
    bool nondecreasing = true;
    bool increments_match = true;
    for (const auto& row : rows) {
        csv.cell(row.step)
            .cell(row.t)
            .cell(static_cast<std::uint64_t>(row.qubit))
            .cell(row.mean_purity)
            .cell(row.stderr_purity)
            .cell(row.mean_window_change)
            .cell(row.stderr_window_change)
            .cell(row.mean_step_change)
            .cell(row.mean_expected_change)
            .cell(row.mean_change_residual)
            .cell(row.stderr_change_residual);
        csv.end_row();
        nondecreasing = nondecreasing && row.mean_window_change >= -5.0 * row.stderr_window_change;
        increments_match = increments_match &&
                           std::abs(row.mean_change_residual) <= 5.0 * row.stderr_change_residual + 1e-15;
    }

    json summary{{"n_sites", params.n_sites},
                 {"energy", initial.energy},
                 {"tunneling", initial.tunneling},
                 {"tau_m", initial.tau_m},
                 {"purity_nondecreasing", nondecreasing},
                 {"increments_match", increments_match}};
    if (get<bool>(block, "twin")) {
        const std::uint64_t twin_steps = get_count(block, "twin_steps", 1);
        RandomStream stream = derive_stream(params.master_seed, 0);
        const double deviation =
            twin_run_max_deviation(start, params.noise_kind, params.dt, twin_steps, stream);
        summary["twin"] = {{"steps", twin_steps},
                           {"max_deviation", deviation},
                           {"within_1e-10", deviation <= 1e-10}};
        out << "bloch: twin-run max |(1+z)-V| = " << format_number(deviation) << "\n";
    }
    write_json(inv.out_dir / "bloch.json", summary);
    out << "bloch: purity non-decreasing = " << (nondecreasing ? "yes" : "no")
        << ", increments match = " << (increments_match ? "yes" : "no") << "\n";
    return kExitOk;
}

int cmd_check(const Invocation& inv, std::ostream& out) {
    const SimParams params = sim_params_from(inv.config);
    const json& block = inv.config["check"];
    const auto grid = get<std::vector<double>>(block, "t_grid");
    const std::uint64_t m = get_count(inv.config, "realizations", 2);
    std::vector<CorrelationRow> rows;
    try {
        rows = correlation_bound_check(params, m, grid, inv.threads);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    CsvWriter csv(inv.out_dir / "check.csv");
    csv.header({"t", "mean_pair", "stderr", "max_pair", "max_pair_stderr", "max_pair_n", "max_pair_k",
                "bound", "margin_stderr", "satisfied"});
    bool all_ok = true;
    for (const auto& row : rows) {
        csv.cell(row.t)
            .cell(row.mean_pair)
            .cell(row.mean_pair_stderr)
            .cell(row.max_pair)
            .cell(row.max_pair_stderr)
            .cell(static_cast<std::uint64_t>(row.max_pair_n))
            .cell(static_cast<std::uint64_t>(row.max_pair_k))
            .cell(row.bound)
            .cell(row.margin_in_stderr)
            .cell(std::string(row.satisfied ? "1" : "0"));
        csv.end_row();
        all_ok = all_ok && row.satisfied;
    }
    write_json(inv.out_dir / "check.json",
               {{"n_sites", params.n_sites}, {"realizations", m}, {"all_satisfied", all_ok}});
    out << "check: bound " << (all_ok ? "holds" : "VIOLATED") << " on all " << rows.size()
        << " grid points\n";
    if (!all_ok && get<bool>(block, "strict")) {
        return kExitCheckFailed;
    }
    return kExitOk;
}

unsigned threads_from(int flag_value) {
    if (flag_value > 0) {
        return static_cast<unsigned>(flag_value);
    }
    if (const char* env = std::getenv(kThreadsEnv)) {
        char* end = nullptr;
        const long parsed = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && parsed > 0) {
            return static_cast<unsigned>(parsed);
        }
        throw ConfigError(std::string(kThreadsEnv) + " must be a positive integer");
    }
    return 1;
}

}  // namespace

json default_config() {
    std::vector<int> sizes;
    for (int n = 4; n <= 512; n *= 2) {
        sizes.push_back(n);
    }
    return json{
        {"schema_version", kSchemaVersion},
        {"n_sites", 4},
        {"dt", 0.04},
        {"delta", 0.01},
        {"t_max", nullptr},
        {"noise_kind", "normal"},
        {"master_seed", 1},
        {"record_path", true},
        {"path_stride", 1},
        {"realizations", 2000},
        {"trajectory", {{"index", 0}}},
        {"sweep", {{"n_list", sizes}, {"n_min", 4}, {"initial_step", false}, {"initial_step_horizon", 1.0}}},
        {"bayes", {{"weights", {0.5, 0.3, 0.2}}, {"t", 50.0}, {"tau_m", 1.0}}},
        {"bloch",
         {{"energy", 0.0},
          {"tunneling", 0.0},
          {"tau_m", 1.0},
          {"steps", 200},
          {"sample_every", 10},
          {"twin", true},
          {"twin_steps", 10000}}},
        {"check", {{"t_grid", {0.0, 0.5, 1.0, 2.0, 5.0}}, {"strict", false}}},
    };
}

void apply_override(json& config, const std::string& key, const std::string& value) {
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded()) {
        parsed = value;
    }
    json* node = &config;
    std::string path;
    std::size_t start = 0;
    for (;;) {
        const std::size_t dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        path += (path.empty() ? "" : ".") + part;
        if (!node->is_object() || !node->contains(part)) {
            throw ConfigError("unknown config key '" + path + "'");
        }
        node = &(*node)[part];
        if (dot == std::string::npos) {
            break;
        }
        start = dot + 1;
    }
    if (node->is_object()) {
        throw ConfigError("config key '" + key + "' is a block; override its fields instead");
    }
    *node = std::move(parsed);
}

SimParams sim_params_from(const json& config) {
    SimParams p;
    p.n_sites = static_cast<std::size_t>(get_count(config, "n_sites", 1));
    p.dt = get<double>(config, "dt");
    p.delta = get<double>(config, "delta");
    if (!config.at("t_max").is_null()) {
        p.t_max = get<double>(config, "t_max");
    }
    try {
        p.noise_kind = parse_noise_kind(get<std::string>(config, "noise_kind"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    p.master_seed = get<std::uint64_t>(config, "master_seed");
    p.record_path = get<bool>(config, "record_path");
    p.path_stride = static_cast<std::size_t>(get_count(config, "path_stride", 1));
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return p;
}

std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Monte Carlo toolkit for wave-function collapse under continuous weak measurement",
                 "collapse_sim"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    int threads_flag = 0;
    std::vector<CLI::App*> commands;
    for (const char* name : {"trajectory", "sweep", "bayes", "bloch", "check"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--out", out_dir, "Output directory (created if missing)");
        sub->add_option("--threads", threads_flag,
                        "Worker threads (falls back to COLLAPSE_SIM_THREADS, then 1)");
        sub->allow_extras();
        commands.push_back(sub);
    }
    commands[0]->description("Single trajectory; writes trajectory.csv with t,U1..UN");
    commands[1]->description("Collapse-time sweep over N; writes sweep.csv and fit.json");
    commands[2]->description("Exact Bayes outcome frequencies; writes bayes.csv and bayes.json");
    commands[3]->description("Bloch-vector purity traces and twin run; writes bloch.csv and bloch.json");
    commands[4]->description("Pair-correlation bound check; writes check.csv and check.json");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitConfigError;
    }

    try {
        Invocation inv;
        inv.config = default_config();
        if (!config_path.empty()) {
            std::ifstream file(config_path);
            if (!file) {
                throw ConfigError("cannot read config file " + config_path);
            }
            json doc = json::parse(file, nullptr, false);
            if (doc.is_discarded()) {
                throw ConfigError("config file " + config_path + " is not valid JSON");
            }
            merge_into(inv.config, doc, "");
        }
        CLI::App* active = app.get_subcommands().front();
        for (const std::string& extra : active->remaining()) {
            if (extra.rfind("--", 0) != 0 || extra.find('=') == std::string::npos) {
                throw ConfigError("unexpected argument '" + extra + "' (overrides are --key=value)");
            }
            const std::size_t eq = extra.find('=');
            apply_override(inv.config, extra.substr(2, eq - 2), extra.substr(eq + 1));
        }
        if (get<int>(inv.config, "schema_version") != kSchemaVersion) {
            throw ConfigError("unsupported schema_version");
        }
        inv.threads = threads_from(threads_flag);
        inv.out_dir = out_dir;
        std::filesystem::create_directories(inv.out_dir);

        const std::string name = active->get_name();
        if (name == "trajectory") {
            return cmd_trajectory(inv, out);
        }
        if (name == "sweep") {
            return cmd_sweep(inv, out);
        }
        if (name == "bayes") {
            return cmd_bayes(inv, out);
        }
        if (name == "bloch") {
            return cmd_bloch(inv, out);
        }
        return cmd_check(inv, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
}

}  // namespace collapse::cli
