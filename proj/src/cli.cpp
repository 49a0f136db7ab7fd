#include "noisecast/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "noisecast/augment.hpp"
#include "noisecast/csv.hpp"
#include "noisecast/dataio.hpp"
#include "noisecast/dgp.hpp"
#include "noisecast/harness.hpp"
#include "noisecast/parallel.hpp"
#include "noisecast/rng.hpp"
#include "noisecast/theory.hpp"

namespace noisecast {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed_override;
    int workers = 0;
    int verbosity = 1;
};

json load_config(const GlobalOpts& g) {
    std::ifstream in(g.config_path);
    if (!in) throw ConfigError("cannot open config file: " + g.config_path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return j;
}

const json& field(const json& j, const std::string& name,
                  const std::string& where) {
    if (!j.contains(name))
        throw ConfigError("missing config field: " + where + name);
    return j.at(name);
}

template <typename T>
T field_as(const json& j, const std::string& name, const std::string& where) {
    try {
        return field(j, name, where).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad config field " + where + name + ": " + e.what());
    }
}

template <typename T>
T field_or(const json& j, const std::string& name, T fallback) {
    if (!j.contains(name)) return fallback;
    try {
        return j.at(name).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad config field " + name + ": " + e.what());
    }
}

std::vector<int> parse_grid(const json& j, const std::string& where) {
    std::vector<int> grid;
    if (j.is_array()) {
        for (const auto& v : j) grid.push_back(v.get<int>());
    } else if (j.is_object()) {
        const int from = field_as<int>(j, "from", where);
        const int to = field_as<int>(j, "to", where);
        if (to < from) throw ConfigError(where + ": to < from");
        if (field_or<bool>(j, "log", false)) {
            const int points = field_as<int>(j, "points", where);
            if (points < 1 || from < 1)
                throw ConfigError(where + ": log grid needs points >= 1, from >= 1");
            for (int i = 0; i < points; ++i) {
                const double t =
                    points == 1 ? 0.0
                                : static_cast<double>(i) / (points - 1);
                grid.push_back(static_cast<int>(std::lround(
                    from * std::pow(static_cast<double>(to) / from, t))));
            }
        } else {
            const int step = field_or<int>(j, "step", 1);
            if (step < 1) throw ConfigError(where + ": step must be >= 1");
            for (int p = from; p <= to; p += step) grid.push_back(p);
            if (grid.empty() || grid.back() != to) grid.push_back(to);
        }
    } else {
        throw ConfigError(where + ": expected array or {from,to,...}");
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (grid.empty()) throw ConfigError(where + ": empty grid");
    return grid;
}

FactorModelSpec parse_spec(const json& j) {
    try {
        return spec_from_json(j);
    } catch (const InvalidInput& e) {
        throw ConfigError(std::string("spec: ") + e.what());
    }
}

CvConfig parse_cv(const json& j) {
    CvConfig cv;
    cv.folds = field_or<int>(j, "folds", 10);
    const std::string rule = field_or<std::string>(j, "split_rule", "kfold");
    if (rule == "kfold") cv.split_rule = CvConfig::Split::KFold;
    else if (rule == "80-20") cv.split_rule = CvConfig::Split::EightyTwenty;
    else if (rule == "time_ordered") cv.split_rule = CvConfig::Split::TimeOrdered;
    else throw ConfigError("cv.split_rule must be kfold | 80-20 | time_ordered");
    cv.grid = field_or<std::vector<double>>(j, "grid", {});
    cv.seed = field_or<std::uint64_t>(j, "seed", 0);
    return cv;
}

MethodConfig parse_method(const json& j, std::uint64_t seed) {
    MethodConfig m;
    m.method = method_from_name(field_as<std::string>(j, "name", "method."));
    if (j.contains("cv")) m.cv = parse_cv(j.at("cv"));
    if (j.contains("k")) m.pca_k = j.at("k").get<int>();
    m.standardize_pseudo = field_or<bool>(j, "standardize", false);
    m.noise_sigma = field_or<double>(j, "noise_sigma", 1.0);
    m.seed = seed;
    return m;
}

Protocol parse_protocol(const json& j, std::uint64_t seed) {
    Protocol p;
    p.kind = protocol_kind_from_name(field_as<std::string>(j, "kind", "protocol."));
    p.window = field_or<int>(j, "window", 0);
    p.fraction = field_or<double>(j, "fraction", 0.5);
    p.repetitions = field_or<int>(j, "repetitions", 1);
    p.seed = seed;
    return p;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

void write_resolved_config(const GlobalOpts& g, const std::string& command,
                           const json& config, std::uint64_t seed) {
    json resolved;
    resolved["command"] = command;
    resolved["config"] = config;
    resolved["seed"] = seed;
    resolved["workers"] = default_workers();
    write_text(fs::path(g.out_dir) / "resolved_config.json",
               resolved.dump(2) + "\n");
}

std::uint64_t resolve_seed(const GlobalOpts& g, const json& config) {
    if (g.seed_override) return *g.seed_override;
    return field_or<std::uint64_t>(config, "seed", 1);
}

Dataset load_dataset(const json& data_cfg) {
    const std::string path = field_as<std::string>(data_cfg, "path", "data.");
    const std::string target = field_as<std::string>(data_cfg, "target", "data.");
    std::optional<std::string> index;
    if (data_cfg.contains("index"))
        index = data_cfg.at("index").get<std::string>();
    Dataset d = load_csv(path, target, index);
    if (data_cfg.contains("transforms")) {
        TransformSpec spec;
        try {
            spec = TransformSpec::from_json(data_cfg.at("transforms"));
        } catch (const json::exception& e) {
            throw ConfigError(std::string("data.transforms: ") + e.what());
        }
        d = apply_transforms(d, spec);
    }
    return d;
}

int cmd_theory_curve(const GlobalOpts& g) {
    const json config = load_config(g);
    const std::uint64_t seed = resolve_seed(g, config);
    const FactorModelSpec spec = parse_spec(field(config, "spec", ""));
    const auto p_grid = parse_grid(field(config, "p_grid", ""), "p_grid");
    const int replications = field_as<int>(config, "replications", "");
    if (replications < 1) throw ConfigError("replications must be >= 1");
    write_resolved_config(g, "theory-curve", config, seed);
    const RiskCurve curve = risk_curve(spec, p_grid, replications,
                                       SeedPath{seed}.child("theory-curve").value);
    std::ofstream out(fs::path(g.out_dir) / "risk_curve.csv");
    curve.write_csv(out);
    if (g.verbosity > 0)
        std::cout << "wrote risk_curve.csv (" << curve.points.size()
                  << " grid points)\n";
    return 0;
}

int cmd_simulate(const GlobalOpts& g) {
    const json config = load_config(g);
    const std::uint64_t seed = resolve_seed(g, config);
    SweepConfig sweep;
    sweep.spec = parse_spec(field(config, "spec", ""));
    sweep.p_grid = parse_grid(field(config, "p_grid", ""), "p_grid");
    sweep.replications = field_as<int>(config, "replications", "");
    if (sweep.replications < 1) throw ConfigError("replications must be >= 1");
    sweep.test_points = field_or<int>(config, "test_points", 50);
    sweep.comparators_informative_only =
        field_or<bool>(config, "comparators_informative_only", false);
    sweep.seed = SeedPath{seed}.child("simulate").value;
    const auto& methods = field(config, "methods", "");
    for (std::size_t i = 0; i < methods.size(); ++i)
        sweep.methods.push_back(parse_method(
            methods[i], SeedPath{sweep.seed}.child("method", i).value));
    write_resolved_config(g, "simulate", config, seed);
    const SweepResult result = run_sweep(sweep);
    std::ofstream out(fs::path(g.out_dir) / "sweep.csv");
    result.write_csv(out);
    if (g.verbosity > 0)
        std::cout << "wrote sweep.csv (" << result.cells.size() << " cells)\n";
    return 0;
}

int cmd_forecast(const GlobalOpts& g) {
    const json config = load_config(g);
    const std::uint64_t seed = resolve_seed(g, config);
    Dataset data = load_dataset(field(config, "data", ""));
    const Protocol protocol = parse_protocol(
        field(config, "protocol", ""), SeedPath{seed}.child("protocol").value);
    const json& method_cfg = field(config, "method", "");
    MethodConfig method =
        parse_method(method_cfg, SeedPath{seed}.child("method").value);
    write_resolved_config(g, "forecast", config, seed);

    std::optional<TuneTrace> trace;
    std::vector<int> p_values;
    int protocol_first_row = 0;  // timeseries tuning reserves a leading span
    const json* aug = method_cfg.contains("augment") ? &method_cfg.at("augment")
                                                     : nullptr;
    if (aug) {
        if (method.method != Method::PseudoOls)
            throw ConfigError("method.augment applies to pseudo_ols only");
        method.noise_sigma = field_or<double>(*aug, "noise_sigma", 1.0);
        if (aug->contains("tune")) {
            const json& tn = aug->at("tune");
            AugmentPlan plan;
            plan.n = data.rows();
            plan.p0 = data.cols();
            plan.noise_sigma = method.noise_sigma;
            plan.regenerations = field_or<int>(tn, "regenerations", 20);
            plan.seed = SeedPath{seed}.child("tune").value;
            plan.c_grid = field_or<std::vector<double>>(tn, "c_grid", {});
            const std::string mode = field_as<std::string>(tn, "mode", "tune.");
            if (mode == "timeseries") {
                const int window = field_as<int>(tn, "window", "tune.");
                const int train_rows =
                    field_or<int>(tn, "train_rows",
                                  static_cast<int>(0.7 * data.rows()));
                if (train_rows <= window || train_rows > data.rows())
                    throw ConfigError("tune.train_rows must lie in (window, rows]");
                plan.n = train_rows;
                if (plan.c_grid.empty())
                    plan.c_grid = AugmentPlan::default_c_grid(plan.p0, plan.n);
                trace = tune_c_timeseries(data.X.topRows(train_rows),
                                          data.y.head(train_rows), plan, window);
                // Forecast only the held-back span; the first rolling
                // window ends exactly at the training boundary.
                if (train_rows < data.rows() &&
                    (protocol.kind == Protocol::Kind::RollingWindow ||
                     protocol.kind == Protocol::Kind::ExpandingWindow))
                    protocol_first_row = train_rows - protocol.window;
            } else if (mode == "kfold") {
                if (plan.c_grid.empty())
                    plan.c_grid = AugmentPlan::default_c_grid(plan.p0, plan.n);
                CvConfig cv = tn.contains("cv") ? parse_cv(tn.at("cv")) : CvConfig{};
                cv.seed = SeedPath{seed}.child("tune-cv").value;
                trace = tune_c_kfold(data.X, data.y, plan, cv);
            } else {
                throw ConfigError("tune.mode must be timeseries | kfold");
            }
            p_values.push_back(trace->chosen_p);
            std::ofstream tf(fs::path(g.out_dir) / "tune_trace.csv");
            trace->write_csv(tf);
        } else if (aug->contains("p_grid")) {
            p_values = parse_grid(aug->at("p_grid"), "augment.p_grid");
            for (int p : p_values)
                if (p < data.cols())
                    throw ConfigError("augment.p_grid values must be >= p0");
        } else if (aug->contains("p")) {
            p_values.push_back(field_as<int>(*aug, "p", "augment."));
        } else {
            throw ConfigError("method.augment needs p, p_grid or tune");
        }
    } else {
        p_values.push_back(0);  // no augmentation
    }

    const Dataset eval_data =
        protocol_first_row > 0
            ? dataset_rows(data, protocol_first_row,
                           data.rows() - protocol_first_row)
            : data;
    json runs = json::array();
    std::optional<ForecastReport> primary;
    double best_mse = std::numeric_limits<double>::infinity();
    for (int p : p_values) {
        MethodConfig m = method;
        m.augment_to_p = p;
        ForecastReport report = run_protocol(eval_data, m, protocol);
        if (trace) report.tune = trace;
        json row;
        row["method"] = report.method_label;
        row["p"] = p > 0 ? p : data.cols();
        row["mse"] = report.mse;
        row["oos_r2"] = report.r2;
        row["n_forecasts"] = report.observations.size();
        row["skipped_windows"] = report.skipped_windows;
        runs.push_back(row);
        if (report.mse < best_mse || !primary) {
            best_mse = report.mse;
            primary = std::move(report);
        }
    }
    json out;
    out["protocol"] = protocol_kind_name(protocol.kind);
    out["runs"] = runs;
    out["report"] = primary->to_json();
    write_text(fs::path(g.out_dir) / "report.json", out.dump(2) + "\n");
    std::ofstream pf(fs::path(g.out_dir) / "predictions.csv");
    primary->write_csv(pf);
    if (g.verbosity > 0)
        std::cout << "wrote report.json and predictions.csv (best mse "
                  << best_mse << ")\n";
    return 0;
}

int cmd_benchmark(const GlobalOpts& g) {
    const json config = load_config(g);
    const std::uint64_t seed = resolve_seed(g, config);
    const auto& grid = field(config, "grid", "");
    if (!grid.is_array() || grid.empty())
        throw ConfigError("grid must be a nonempty array of [n, p] pairs");
    const int runs = field_or<int>(config, "runs", 5);
    if (runs < 5) throw ConfigError("runs must be >= 5");
    write_resolved_config(g, "benchmark", config, seed);
    std::ofstream out(fs::path(g.out_dir) / "timings.csv");
    out << "n,p,median_ms\n";
    for (const auto& cell : grid) {
        const int n = cell.at(0).get<int>();
        const int p = cell.at(1).get<int>();
        if (n < 2 || p < 1) throw ConfigError("grid entries need n >= 2, p >= 1");
        Matrix X(n, p);
        Vector y(n);
        RandomStream ys(seed, 1);
        for (int i = 0; i < n; ++i) y(i) = ys.normal(static_cast<std::uint64_t>(i));
        for (int j = 0; j < p; ++j) {
            RandomStream s(seed, 100 + static_cast<std::uint64_t>(j));
            for (int i = 0; i < n; ++i) X(i, j) = s.normal(static_cast<std::uint64_t>(i));
        }
        std::vector<double> ms;
        for (int r = 0; r < runs; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            volatile double sink = min_norm_solve(X, y).sum();
            (void)sink;
            const auto t1 = std::chrono::steady_clock::now();
            ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
        std::sort(ms.begin(), ms.end());
        const double median = ms[ms.size() / 2];
        out << n << ',' << p << ',' << format_double(median) << '\n';
        if (g.verbosity > 0)
            std::cout << "min_norm_solve n=" << n << " p=" << p << ": " << median
                      << " ms\n";
    }
    return 0;
}

int cmd_tune(const GlobalOpts& g) {
    const json config = load_config(g);
    const std::uint64_t seed = resolve_seed(g, config);
    Dataset data = load_dataset(field(config, "data", ""));
    const json& plan_cfg = field(config, "plan", "");
    AugmentPlan plan;
    plan.n = data.rows();
    plan.p0 = data.cols();
    plan.noise_sigma = field_or<double>(plan_cfg, "noise_sigma", 1.0);
    plan.regenerations = field_or<int>(plan_cfg, "regenerations", 20);
    plan.c_grid = field_or<std::vector<double>>(plan_cfg, "c_grid", {});
    if (plan.c_grid.empty())
        plan.c_grid = AugmentPlan::default_c_grid(plan.p0, plan.n);
    plan.seed = SeedPath{seed}.child("tune").value;
    const std::string mode = field_as<std::string>(config, "mode", "");
    write_resolved_config(g, "tune", config, seed);
    TuneTrace trace;
    if (mode == "timeseries") {
        const int window = field_as<int>(config, "window", "");
        trace = tune_c_timeseries(data.X, data.y, plan, window);
    } else if (mode == "kfold") {
        CvConfig cv = config.contains("cv") ? parse_cv(config.at("cv")) : CvConfig{};
        cv.seed = SeedPath{seed}.child("tune-cv").value;
        trace = tune_c_kfold(data.X, data.y, plan, cv);
    } else {
        throw ConfigError("mode must be timeseries | kfold");
    }
    std::ofstream out(fs::path(g.out_dir) / "tune_trace.csv");
    trace.write_csv(out);
    if (g.verbosity > 0)
        std::cout << "chosen C = " << trace.chosen_c << ", p = " << trace.chosen_p
                  << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"noise-augmented ridgeless forecasting toolkit"};
    app.require_subcommand(1);
    GlobalOpts g;
    std::uint64_t seed_raw = 0;
    bool seed_set = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", g.config_path, "JSON config file")->required();
        sub->add_option("--out", g.out_dir, "output directory");
        sub->add_option("--seed", seed_raw, "global seed override")
            ->each([&](const std::string&) { seed_set = true; });
        sub->add_option("--workers", g.workers, "worker pool size");
        sub->add_option("--verbosity", g.verbosity, "0 = quiet");
    };
    CLI::App* c_theory = app.add_subcommand("theory-curve",
                                            "exact risk curve over a p grid");
    CLI::App* c_sim = app.add_subcommand("simulate", "Monte-Carlo method sweep");
    CLI::App* c_fore = app.add_subcommand("forecast", "forecast a CSV dataset");
    CLI::App* c_bench = app.add_subcommand("benchmark", "time min_norm_solve");
    CLI::App* c_tune = app.add_subcommand("tune", "choose the augmentation C");
    for (CLI::App* sub : {c_theory, c_sim, c_fore, c_bench, c_tune})
        add_common(sub);

    try {
        std::vector<std::string> argv_rev(args.rbegin(), args.rend());
        app.parse(argv_rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (seed_set) g.seed_override = seed_raw;
    if (g.workers > 0) set_default_workers(g.workers);

    try {
        std::error_code ec;
        fs::create_directories(g.out_dir, ec);
        if (ec) throw DataError("cannot create output directory " + g.out_dir);
        if (c_theory->parsed()) return cmd_theory_curve(g);
        if (c_sim->parsed()) return cmd_simulate(g);
        if (c_fore->parsed()) return cmd_forecast(g);
        if (c_bench->parsed()) return cmd_benchmark(g);
        if (c_tune->parsed()) return cmd_tune(g);
        throw ConfigError("no subcommand given");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const InvalidInput& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    }
}

}  // namespace noisecast
