// Batch front end wiring a key-value config file to the pipeline:
// ingest/synth -> backtest -> combine -> evaluate -> report.
//
// Exit codes: 0 success, 2 config or validation error, 3 runtime failure.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "epfvst/backtest.hpp"
#include "epfvst/combine.hpp"
#include "epfvst/dates.hpp"
#include "epfvst/eval.hpp"
#include "epfvst/panel.hpp"
#include "epfvst/rng.hpp"
#include "epfvst/vst.hpp"

namespace fs = std::filesystem;
using namespace epfvst;

namespace {

// ---------------------------------------------------------------------------
// Config file: `key = value` lines, '#' comments, strict key set.

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "market", "out", "seed", "data", "panel",
        "col.timestamp", "col.utc_offset", "col.price", "col.load_fc", "col.res_fc",
        "col.coal", "col.gas", "col.oil", "col.eua",
        "synth_days", "synth_regime", "synth_start",
        "model", "windows", "families",
        "param.asinh", "param.boxcox", "param.mlog", "param.tpit",
        "first_forecast", "last_forecast", "warmup", "mad_adjust", "narx_ensemble",
        "pools", "subset_cap", "mae_mode", "baseline", "regimes",
    };
    return keys;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct Config {
    std::map<std::string, std::string> kv;

    bool has(const std::string& key) const { return kv.count(key) != 0; }

    const std::string& require(const std::string& key) const {
        const auto it = kv.find(key);
        if (it == kv.end()) throw std::invalid_argument("missing config key: " + key);
        return it->second;
    }

    std::string get_or(const std::string& key, const std::string& fallback) const {
        const auto it = kv.find(key);
        return it == kv.end() ? fallback : it->second;
    }
};

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config: " + path);
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        " is not key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        " has an empty key or value");
        if (!known_keys().count(key))
            throw std::invalid_argument("unknown config key: " + key);
        if (!cfg.kv.emplace(key, value).second)
            throw std::invalid_argument("duplicate config key: " + key);
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Small parsers with key-named errors.

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    return out;
}

long long parse_int(const std::string& key, const std::string& value) {
    long long v = 0;
    const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || p != value.data() + value.size())
        throw std::invalid_argument("bad integer for " + key + ": " + value);
    return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || p != value.data() + value.size())
        throw std::invalid_argument("bad unsigned integer for " + key + ": " + value);
    return v;
}

double parse_double(const std::string& key, const std::string& value) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || p != value.data() + value.size())
        throw std::invalid_argument("bad number for " + key + ": " + value);
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw std::invalid_argument("bad boolean for " + key + ": " + value +
                                " (use true or false)");
}

Date parse_date(const std::string& key, const std::string& value) {
    try {
        return Date::parse(value);
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument("bad date for " + key + ": " + value);
    }
}

// ---------------------------------------------------------------------------
// Run context shared by the commands.

struct Context {
    Config cfg;
    std::string market;
    fs::path out_root;
    std::uint64_t seed = 0;
    int jobs = 1;

    fs::path market_dir() const { return out_root / market; }
    fs::path panel_path() const {
        return cfg.has("panel") ? fs::path(cfg.require("panel")) : market_dir() / "panel.csv";
    }
    fs::path manifest_path() const { return market_dir() / "manifest.json"; }
    fs::path combined_dir() const { return market_dir() / "combined"; }
    fs::path eval_dir() const { return market_dir() / "eval"; }
    fs::path reports_dir() const { return market_dir() / "reports"; }
};

Context make_context(const std::string& config_path, const std::string& out_override,
                     std::optional<std::uint64_t> seed_override, int jobs) {
    Context ctx;
    ctx.cfg = load_config(config_path);
    ctx.market = ctx.cfg.require("market");
    if (ctx.market.find_first_not_of("abcdefghijklmnopqrstuvwxyz0123456789_-") !=
        std::string::npos)
        throw std::invalid_argument("market id must be lowercase tokens: " + ctx.market);
    ctx.out_root = out_override.empty() ? fs::path(ctx.cfg.get_or("out", "out"))
                                        : fs::path(out_override);
    ctx.seed = seed_override ? *seed_override : parse_u64("seed", ctx.cfg.require("seed"));
    ctx.jobs = std::max(1, jobs);
    return ctx;
}

// ---------------------------------------------------------------------------
// Stream name <-> file layout.
//   base:     <model>/<family>/<param>/<window>  ->  <model>/<window>/<family>/<param>.csv
//   combined: <SCHEME>(<label>)[/<window>]       ->  combined/<name>.csv

fs::path stream_path(const Context& ctx, const std::string& name) {
    if (name.find('(') != std::string::npos) return ctx.combined_dir() / (name + ".csv");
    const auto parts = split(name, '/');
    if (parts.size() != 4)
        throw std::invalid_argument("not a recognizable stream name: " + name);
    return ctx.market_dir() / parts[0] / parts[3] / parts[1] / (parts[2] + ".csv");
}

/// Window encoded in a stream name: trailing "/<int>" segment, else 0.
int window_of_name(const std::string& name) {
    const auto slash = name.rfind('/');
    if (slash == std::string::npos) return 0;
    const std::string tail = name.substr(slash + 1);
    int w = 0;
    const auto [p, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), w);
    return ec == std::errc() && p == tail.data() + tail.size() ? w : 0;
}

backtest::ForecastStream load_stream(const Context& ctx, const std::string& name) {
    auto s = backtest::read_stream_csv(stream_path(ctx, name).string());
    s.name = name;
    s.window = window_of_name(name);
    if (name.find('(') == std::string::npos) {
        const auto parts = split(name, '/');
        s.model = backtest::model_from_name(parts[0]);
        s.family = vst::family_from_name(parts[1]);
        s.param = parse_double("param", parts[2]);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Plan assembly from config.

backtest::BacktestPlan plan_from_config(const Context& ctx) {
    backtest::BacktestPlan plan;
    plan.model = backtest::model_from_name(ctx.cfg.get_or("model", "lear"));
    plan.windows.clear();
    for (const auto& tok : split(ctx.cfg.require("windows"), ',')) {
        const int w = static_cast<int>(parse_int("windows", tok));
        if (std::find(plan.windows.begin(), plan.windows.end(), w) != plan.windows.end())
            throw std::invalid_argument("duplicate window in config: " + tok);
        plan.windows.push_back(w);
    }

    plan.grid.values.clear();
    for (const auto& tok : split(ctx.cfg.require("families"), ',')) {
        const vst::Family family = vst::family_from_name(tok);
        if (plan.grid.values.count(family))
            throw std::invalid_argument("duplicate family in config: " + tok);
        if (family == vst::Family::identity) {
            plan.grid.values[family] = {0.0};
            continue;
        }
        const std::string key = "param." + tok;
        std::vector<double> params;
        for (const auto& ptok : split(ctx.cfg.require(key), ','))
            params.push_back(parse_double(key, ptok));
        std::sort(params.begin(), params.end());
        if (std::adjacent_find(params.begin(), params.end()) != params.end())
            throw std::invalid_argument("duplicate parameter in " + key);
        plan.grid.values[family] = std::move(params);
    }

    plan.first_forecast_day = parse_date("first_forecast", ctx.cfg.require("first_forecast"));
    plan.last_forecast_day = parse_date("last_forecast", ctx.cfg.require("last_forecast"));
    plan.combiner_warmup = static_cast<int>(parse_int("warmup", ctx.cfg.get_or("warmup", "56")));
    plan.seed = ctx.seed;
    plan.mad_adjust = parse_bool("mad_adjust", ctx.cfg.get_or("mad_adjust", "false"));
    plan.narx_ensemble =
        static_cast<int>(parse_int("narx_ensemble", ctx.cfg.get_or("narx_ensemble", "10")));
    return plan;
}

data::CsvSchema schema_from_config(const Config& cfg) {
    data::CsvSchema schema;
    schema.timestamp = cfg.get_or("col.timestamp", schema.timestamp);
    schema.utc_offset = cfg.get_or("col.utc_offset", schema.utc_offset);
    schema.price = cfg.get_or("col.price", schema.price);
    schema.load_fc = cfg.get_or("col.load_fc", schema.load_fc);
    schema.res_fc = cfg.get_or("col.res_fc", schema.res_fc);
    schema.coal = cfg.get_or("col.coal", schema.coal);
    schema.gas = cfg.get_or("col.gas", schema.gas);
    schema.oil = cfg.get_or("col.oil", schema.oil);
    schema.eua = cfg.get_or("col.eua", schema.eua);
    return schema;
}

eval::RegimeSplit regimes_from_config(const Config& cfg) {
    if (!cfg.has("regimes")) return eval::RegimeSplit::defaults();
    eval::RegimeSplit split_result;
    for (const auto& tok : split(cfg.require("regimes"), ';')) {
        const auto parts = split(tok, ':');
        if (parts.size() != 3)
            throw std::invalid_argument("bad regime (want name:first:last): " + tok);
        split_result.ranges.push_back({parts[0], parse_date("regimes", parts[1]),
                                       parse_date("regimes", parts[2])});
    }
    split_result.validate();
    return split_result;
}

// ---------------------------------------------------------------------------
// Shared IO helpers.

std::string hash_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for hashing: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a:%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

data::HourlyPanel load_panel(const Context& ctx) {
    const auto path = ctx.panel_path();
    if (!fs::exists(path))
        throw std::invalid_argument("panel file not found (run ingest or synth): " +
                                    path.string());
    return data::ingest_csv(path.string()).panel;
}

void write_text(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed: " + path.string());
}

/// Forecast-day calendar slice of a stream: [lo, hi], both inclusive.
backtest::ForecastStream clip_stream(const backtest::ForecastStream& s, Date lo, Date hi) {
    const int from = std::max(0, lo - s.first_day);
    const int to = std::min(s.days(), hi - s.first_day + 1);
    if (from >= to)
        throw std::invalid_argument("stream does not cover the report span: " + s.name);
    backtest::ForecastStream out = s;
    out.first_day = s.first_day + from;
    out.fc.assign(s.fc.begin() + static_cast<std::ptrdiff_t>(from) * 24,
                  s.fc.begin() + static_cast<std::ptrdiff_t>(to) * 24);
    return out;
}

/// Sorted names of the base streams recorded in the manifest plus every
/// combined stream present on disk.
std::vector<std::string> discover_streams(const Context& ctx) {
    std::vector<std::string> names;
    const auto manifest_file = ctx.manifest_path();
    if (!fs::exists(manifest_file))
        throw std::invalid_argument("manifest not found (run backtest first): " +
                                    manifest_file.string());
    std::ifstream in(manifest_file);
    nlohmann::json manifest;
    in >> manifest;
    for (const auto& [name, hash] : manifest.at("streams").items()) names.push_back(name);
    if (fs::exists(ctx.combined_dir()))
        for (const auto& entry : fs::recursive_directory_iterator(ctx.combined_dir())) {
            if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
            const auto rel = fs::relative(entry.path(), ctx.combined_dir()).string();
            const auto name = rel.substr(0, rel.size() - 4);
            if (name.size() > 8 && name.substr(name.size() - 8) == "_choices") continue;
            names.push_back(name);
        }
    std::sort(names.begin(), names.end());
    return names;
}

/// Daily errors of every discovered stream over the shared reporting span
/// [first_forecast + warmup, last_forecast].
std::vector<eval::DailyErrors> evaluate_all(const Context& ctx, const data::HourlyPanel& panel,
                                            const backtest::BacktestPlan& plan,
                                            eval::MaeMode mode,
                                            std::vector<double>* aggregates = nullptr) {
    const Date lo = plan.first_forecast_day + plan.combiner_warmup;
    const Date hi = plan.last_forecast_day;
    std::vector<eval::DailyErrors> results;
    for (const auto& name : discover_streams(ctx)) {
        const auto stream = clip_stream(load_stream(ctx, name), lo, hi);
        auto res = eval::mae(panel, stream, mode);
        if (aggregates) aggregates->push_back(res.aggregate);
        results.push_back(std::move(res.daily));
    }
    return results;
}

// ---------------------------------------------------------------------------
// Commands. Each runs under a phase marker: failures before the marker flips
// are config/validation errors (exit 2), later ones runtime failures (3).

struct Phase {
    bool computing = false;
};

int cmd_ingest(Context& ctx, Phase& phase) {
    const std::string data = ctx.cfg.require("data");
    if (!fs::exists(data)) throw std::invalid_argument("data file not found: " + data);
    const auto schema = schema_from_config(ctx.cfg);
    const auto result = data::ingest_csv(data, schema);  // input validation

    phase.computing = true;
    fs::create_directories(ctx.market_dir());
    data::write_panel_csv(result.panel, ctx.panel_path().string());
    std::string log;
    for (const auto& action : result.log) log += action.to_string() + "\n";
    write_text(ctx.market_dir() / "ingest_log.txt", log);
    std::cout << "panel: " << ctx.panel_path().string() << " (" << result.panel.days
              << " days)\nrepairs: " << result.log.size() << "\n";
    return 0;
}

int cmd_synth(Context& ctx, Phase& phase) {
    const int days = static_cast<int>(parse_int("synth_days", ctx.cfg.require("synth_days")));
    const auto regime = data::regime_from_name(ctx.cfg.get_or("synth_regime", "stable"));
    const Date start = ctx.cfg.has("synth_start")
                           ? parse_date("synth_start", ctx.cfg.require("synth_start"))
                           : Date(2019, 1, 1);
    if (days < 28) throw std::invalid_argument("synth_days must be >= 28");

    phase.computing = true;
    const auto panel = data::synth_panel(days, ctx.seed, regime, start);
    fs::create_directories(ctx.market_dir());
    data::write_panel_csv(panel, ctx.panel_path().string());
    std::cout << "panel: " << ctx.panel_path().string() << " (" << days << " days, "
              << data::regime_name(regime) << ")\n";
    return 0;
}

int cmd_backtest(Context& ctx, Phase& phase) {
    const auto panel = load_panel(ctx);
    const auto plan = plan_from_config(ctx);
    plan.validate(panel);
    const std::string panel_hash = hash_file(ctx.panel_path());

    struct Job {
        int window;
        vst::Family family;
        double param;
        std::string name;
    };
    std::vector<Job> jobs;
    for (int w : plan.windows)
        for (const auto& [family, params] : plan.grid.values)
            for (double p : params)
                jobs.push_back({w, family, p, backtest::stream_name(plan.model, family, p, w)});

    phase.computing = true;
    nlohmann::json manifest;
    if (fs::exists(ctx.manifest_path())) {
        std::ifstream in(ctx.manifest_path());
        try {
            in >> manifest;
        } catch (const nlohmann::json::exception&) {
            manifest = nlohmann::json::object();  // unreadable: rebuild everything
        }
    }
    const auto matches = [&](const char* key, const nlohmann::json& want) {
        return manifest.contains(key) && manifest[key] == want;
    };
    if (!matches("seed", plan.seed) || !matches("panel_hash", panel_hash) ||
        !matches("model", backtest::model_name(plan.model)) ||
        !matches("mad_adjust", plan.mad_adjust) ||
        !matches("narx_ensemble", plan.narx_ensemble) || !manifest.contains("streams")) {
        manifest = nlohmann::json::object();
        manifest["seed"] = plan.seed;
        manifest["panel_hash"] = panel_hash;
        manifest["model"] = backtest::model_name(plan.model);
        manifest["mad_adjust"] = plan.mad_adjust;
        manifest["narx_ensemble"] = plan.narx_ensemble;
        manifest["streams"] = nlohmann::json::object();
    }

    std::mutex mu;
    const auto save_manifest = [&] {
        write_text(ctx.manifest_path(), manifest.dump(2) + "\n");
    };

    std::vector<std::string> status(jobs.size());
    std::vector<std::vector<std::string>> fallback_logs(jobs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;

    const auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            const auto& job = jobs[i];
            const auto path = stream_path(ctx, job.name);
            try {
                {
                    std::lock_guard<std::mutex> lock(mu);
                    const auto& streams = manifest["streams"];
                    if (streams.contains(job.name) && fs::exists(path)) {
                        if (hash_file(path) == streams[job.name]) {
                            status[i] = "skipped " + job.name + " (up to date)";
                            continue;
                        }
                        std::cerr << "warning: stream file changed on disk, recomputing: "
                                  << job.name << "\n";
                    }
                }
                auto stream =
                    backtest::run_stream(panel, plan, job.window, job.family, job.param,
                                         &fallback_logs[i]);
                backtest::write_stream_csv(stream, path.string());
                {
                    std::lock_guard<std::mutex> lock(mu);
                    manifest["streams"][job.name] = hash_file(path);
                    save_manifest();
                }
                status[i] = "computed " + job.name;
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    const int n_workers = std::min<int>(ctx.jobs, static_cast<int>(jobs.size()));
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    std::string log;
    for (const auto& lines : fallback_logs)
        for (const auto& line : lines) log += line + "\n";
    write_text(ctx.market_dir() / "backtest_log.txt", log);
    for (const auto& line : status) std::cout << line << "\n";
    return 0;
}

int cmd_combine(Context& ctx, Phase& phase) {
    const auto panel = load_panel(ctx);
    const auto plan = plan_from_config(ctx);
    plan.validate(panel);
    const int cap = static_cast<int>(parse_int("subset_cap", ctx.cfg.get_or("subset_cap", "3")));
    if (cap < 1) throw std::invalid_argument("subset_cap must be >= 1");
    if (plan.combiner_warmup < 1)
        throw std::invalid_argument("combining needs warmup >= 1");

    // Pools: explicit `label:member+member;...`, or one pool per (window,
    // family) with at least two grid points when the key is absent.
    std::vector<std::pair<std::string, std::vector<std::string>>> pools;
    if (ctx.cfg.has("pools")) {
        for (const auto& tok : split(ctx.cfg.require("pools"), ';')) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos)
                throw std::invalid_argument("bad pool (want label:a+b+...): " + tok);
            const std::string label = trim(tok.substr(0, colon));
            std::vector<std::string> members;
            for (const auto& m : split(tok.substr(colon + 1), '+')) members.push_back(m);
            if (label.empty() || members.empty())
                throw std::invalid_argument("bad pool (want label:a+b+...): " + tok);
            pools.emplace_back(label, std::move(members));
        }
    } else {
        for (int w : plan.windows)
            for (const auto& [family, params] : plan.grid.values) {
                if (params.size() < 2) continue;
                std::vector<std::string> members;
                for (double p : params)
                    members.push_back(backtest::stream_name(plan.model, family, p, w));
                pools.emplace_back(vst::family_name(family), std::move(members));
            }
        if (pools.empty())
            throw std::invalid_argument(
                "no pools: every family has a single grid point; set `pools` explicitly");
    }
    for (const auto& [label, members] : pools)
        for (const auto& name : members)
            if (!fs::exists(stream_path(ctx, name)))
                throw std::invalid_argument("missing stream: " + name);

    phase.computing = true;
    for (const auto& [label, members] : pools) {
        std::vector<backtest::ForecastStream> streams;
        for (const auto& name : members) streams.push_back(load_stream(ctx, name));
        const auto pool = combine::make_pool(streams, panel, plan.combiner_warmup, label);
        const combine::CombineResult results[] = {combine::sel_fix(pool),
                                                  combine::sel_roll(pool),
                                                  combine::avg_fix(pool, cap),
                                                  combine::avg_roll(pool, cap)};
        for (const auto& res : results) {
            const auto path = ctx.combined_dir() / (res.stream.name + ".csv");
            backtest::write_stream_csv(res.stream, path.string());
            const auto choices_path =
                ctx.combined_dir() / (res.stream.name + "_choices.csv");
            combine::write_choice_csv(res.choices, choices_path.string());
            std::cout << "combined " << res.stream.name << "\n";
        }
    }
    return 0;
}

int cmd_evaluate(Context& ctx, Phase& phase) {
    const auto panel = load_panel(ctx);
    const auto plan = plan_from_config(ctx);
    plan.validate(panel);
    const auto mode = eval::mae_mode_from_name(ctx.cfg.get_or("mae_mode", "standard"));
    discover_streams(ctx);  // validates the manifest exists before side effects

    phase.computing = true;
    std::vector<double> aggregates;
    const auto results = evaluate_all(ctx, panel, plan, mode, &aggregates);
    for (std::size_t i = 0; i < results.size(); ++i) {
        std::string csv = "day,mae\n";
        for (int d = 0; d < results[i].days(); ++d) {
            char buf[40];
            const auto [end, ec] =
                std::to_chars(buf, buf + sizeof(buf), results[i].mae_d[d]);
            if (ec != std::errc()) throw std::runtime_error("cannot format value");
            csv += (results[i].first_day + d).to_string();
            csv += ',';
            csv.append(buf, end);
            csv += '\n';
        }
        write_text(ctx.eval_dir() / (results[i].config + ".csv"), csv);
        std::cout << results[i].config << " " << aggregates[i] << "\n";
    }
    return 0;
}

int cmd_report(Context& ctx, Phase& phase) {
    const auto panel = load_panel(ctx);
    const auto plan = plan_from_config(ctx);
    plan.validate(panel);
    const auto mode = eval::mae_mode_from_name(ctx.cfg.get_or("mae_mode", "standard"));
    const auto regimes = regimes_from_config(ctx.cfg);
    const std::string baseline = ctx.cfg.require("baseline");
    const auto names = discover_streams(ctx);
    if (std::find(names.begin(), names.end(), baseline) == names.end())
        throw std::invalid_argument("baseline not found: " + baseline);

    phase.computing = true;
    const auto results = evaluate_all(ctx, panel, plan, mode);
    const auto report = eval::regime_report(results, regimes, baseline);
    eval::write_mae_summary(report, (ctx.reports_dir() / "mae_summary.csv").string());
    eval::write_cpa_matrix(eval::cpa_matrix(results),
                           (ctx.reports_dir() / "cpa_matrix.csv").string());

    // Ex-post parameter histogram per calibration window over base streams.
    const Date lo = plan.first_forecast_day + plan.combiner_warmup;
    const Date hi = plan.last_forecast_day;
    for (int w : plan.windows) {
        std::vector<backtest::ForecastStream> streams;
        for (const auto& name : names)
            if (name.find('(') == std::string::npos && window_of_name(name) == w)
                streams.push_back(clip_stream(load_stream(ctx, name), lo, hi));
        if (streams.empty()) continue;
        const auto cb = backtest::crystal_ball(streams, panel);
        eval::write_param_histogram(
            cb.histogram,
            (ctx.reports_dir() / ("param_histogram_" + std::to_string(w) + ".csv")).string());
    }
    std::cout << "reports: " << ctx.reports_dir().string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"day-ahead electricity price forecasting pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::uint64_t seed_value = 0;
    bool seed_given = false;
    int jobs = 1;

    const std::map<std::string, std::string> commands = {
        {"ingest", "parse a market CSV into a repaired hourly panel"},
        {"synth", "generate a deterministic synthetic panel"},
        {"backtest", "run the rolling-calibration forecast sweep (resumable)"},
        {"combine", "run the selection/averaging schemes over stream pools"},
        {"evaluate", "score every stream and persist daily errors"},
        {"report", "write MAE summary, pairwise test matrix, and histograms"},
    };
    for (const auto& [name, desc] : commands) {
        auto* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", config_path, "config file path")->required();
        sub->add_option("--jobs", jobs, "worker threads for independent streams");
        sub->add_option("--out", out_override, "output root (overrides config)");
        sub->add_option("--seed", seed_value, "seed (overrides config)")
            ->each([&](const std::string&) { seed_given = true; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    Phase phase;
    try {
        Context ctx = make_context(
            config_path, out_override,
            seed_given ? std::optional<std::uint64_t>(seed_value) : std::nullopt, jobs);
        const std::string name = app.get_subcommands().front()->get_name();
        if (name == "ingest") return cmd_ingest(ctx, phase);
        if (name == "synth") return cmd_synth(ctx, phase);
        if (name == "backtest") return cmd_backtest(ctx, phase);
        if (name == "combine") return cmd_combine(ctx, phase);
        if (name == "evaluate") return cmd_evaluate(ctx, phase);
        return cmd_report(ctx, phase);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return phase.computing ? 3 : 2;
    }
}
