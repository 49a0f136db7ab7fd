#include "noisecast/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "noisecast/csv.hpp"
#include "noisecast/parallel.hpp"
#include "noisecast/rng.hpp"

namespace noisecast {

void Protocol::validate(int rows) const {
    switch (kind) {
        case Kind::RollingWindow:
        case Kind::ExpandingWindow:
            if (window < 2 || window >= rows)
                throw InvalidInput("Protocol: need 2 <= window < rows");
            break;
        case Kind::RandomSplit:
        case Kind::FixedSplit:
            if (!(fraction > 0.0 && fraction < 1.0))
                throw InvalidInput("Protocol: fraction must lie in (0, 1)");
            if (repetitions < 1)
                throw InvalidInput("Protocol: repetitions must be >= 1");
            break;
    }
}

std::string protocol_kind_name(Protocol::Kind k) {
    switch (k) {
        case Protocol::Kind::RandomSplit: return "random_split";
        case Protocol::Kind::FixedSplit: return "fixed_split";
        case Protocol::Kind::RollingWindow: return "rolling";
        case Protocol::Kind::ExpandingWindow: return "expanding";
    }
    return "?";
}

Protocol::Kind protocol_kind_from_name(const std::string& name) {
    if (name == "random_split") return Protocol::Kind::RandomSplit;
    if (name == "fixed_split") return Protocol::Kind::FixedSplit;
    if (name == "rolling") return Protocol::Kind::RollingWindow;
    if (name == "expanding") return Protocol::Kind::ExpandingWindow;
    throw InvalidInput("unknown protocol kind: " + name);
}

std::string MethodConfig::label() const {
    std::string s = method_name(method);
    if (method == Method::PseudoOls && augment_to_p > 0)
        s += "(p=" + std::to_string(augment_to_p) + ")";
    return s;
}

double oos_r2(const std::vector<R2Pair>& pairs) {
    if (pairs.empty()) throw InvalidInput("oos_r2: empty input");
    double num = 0.0, den = 0.0;
    for (const auto& pr : pairs) {
        num += (pr.truth - pr.prediction) * (pr.truth - pr.prediction);
        den += (pr.truth - pr.benchmark) * (pr.truth - pr.benchmark);
    }
    if (den == 0.0) {
        if (num == 0.0) return 0.0;
        throw InvalidInput("oos_r2: zero benchmark denominator");
    }
    return 1.0 - num / den;
}

nlohmann::json ForecastReport::to_json() const {
    nlohmann::json j;
    j["method"] = method_label;
    j["protocol"] = protocol_label;
    j["mse"] = mse;
    j["oos_r2"] = r2;
    j["n_forecasts"] = observations.size();
    j["skipped_windows"] = skipped_windows;
    if (!repetition_mse.empty()) j["repetition_mse"] = repetition_mse;
    if (tune) {
        nlohmann::json t;
        t["chosen_c"] = tune->chosen_c;
        t["chosen_p"] = tune->chosen_p;
        nlohmann::json recs = nlohmann::json::array();
        for (const auto& r : tune->records)
            recs.push_back({{"C", r.c},
                            {"p", r.p},
                            {"mean_loss", r.mean_loss},
                            {"std_loss", r.std_loss}});
        t["records"] = recs;
        j["tune"] = t;
    }
    nlohmann::json obs = nlohmann::json::array();
    for (const auto& o : observations)
        obs.push_back({{"origin", o.origin},
                       {"truth", o.truth},
                       {"prediction", o.prediction},
                       {"benchmark", o.benchmark}});
    j["observations"] = obs;
    return j;
}

void ForecastReport::write_csv(std::ostream& os) const {
    os << "origin,truth,prediction,benchmark\n";
    for (const auto& o : observations)
        os << o.origin << ',' << format_double(o.truth) << ','
           << format_double(o.prediction) << ',' << format_double(o.benchmark)
           << '\n';
}

namespace {

LinearPredictor fit_method(const MethodConfig& cfg, const Matrix& X,
                           const Vector& y, std::uint64_t cell_seed) {
    switch (cfg.method) {
        case Method::PseudoOls:
            return fit_pseudo_ols(X, y, {}, cfg.standardize_pseudo);
        case Method::Ols:
            return fit_ols(X, y);
        case Method::Ridge: {
            CvConfig cv = cfg.cv;
            cv.seed = cell_seed;
            return fit_ridge_cv(X, y, cv);
        }
        case Method::Lasso: {
            CvConfig cv = cfg.cv;
            cv.seed = cell_seed;
            return fit_lasso_cv(X, y, cv);
        }
        case Method::PcaRegression:
            return fit_pca_regression(X, y, cfg.pca_k);
    }
    throw InvalidInput("fit_method: unknown method");
}

bool window_finite(const Matrix& X, const Vector& y, int first, int len,
                   int target_row) {
    for (int r = first; r < first + len; ++r)
        if (!X.row(r).allFinite() || !std::isfinite(y(r))) return false;
    return X.row(target_row).allFinite() && std::isfinite(y(target_row));
}

void finalize(ForecastReport& report) {
    double sse = 0.0;
    std::vector<R2Pair> pairs;
    pairs.reserve(report.observations.size());
    for (const auto& o : report.observations) {
        sse += (o.truth - o.prediction) * (o.truth - o.prediction);
        pairs.push_back({o.truth, o.prediction, o.benchmark});
    }
    report.mse = report.observations.empty()
                     ? std::numeric_limits<double>::quiet_NaN()
                     : sse / static_cast<double>(report.observations.size());
    report.r2 = report.observations.empty()
                    ? std::numeric_limits<double>::quiet_NaN()
                    : oos_r2(pairs);
}

// Augmentation used inside protocols: noise columns span every row of the
// dataset once, so each appended predictor behaves like one observed
// series across train and evaluation periods.
Matrix maybe_augment(const Dataset& data, const MethodConfig& cfg) {
    if (cfg.method == Method::PseudoOls && cfg.augment_to_p > data.cols()) {
        return augment_with_noise(data.X, cfg.augment_to_p - data.cols(),
                                  cfg.noise_sigma, cfg.seed);
    }
    return data.X;
}

ForecastReport run_windows(const Dataset& data, const MethodConfig& method,
                           int window, bool expanding) {
    const int rows = data.rows();
    if (window < 2 || window >= rows)
        throw InvalidInput("run_rolling: need 2 <= window < rows");
    if (data.index_name.empty())
        throw InvalidInput("rolling/expanding protocols require an index column");
    const Matrix X = maybe_augment(data, method);
    ForecastReport report;
    report.method_label = method.label();
    report.protocol_label = expanding ? "expanding" : "rolling";
    const int n_origins = rows - window;
    std::vector<ForecastReport::Obs> slots(static_cast<std::size_t>(n_origins));
    std::vector<char> used(static_cast<std::size_t>(n_origins), 0);
    const SeedPath root{method.seed};
    parallel_for(n_origins, [&](long oi) {
        const int t = window - 1 + static_cast<int>(oi);  // last training row
        const int first = expanding ? 0 : t - window + 1;
        const int len = t - first + 1;
        if (!window_finite(X, data.y, first, len, t + 1)) return;
        const Matrix Xw = X.middleRows(first, len);
        const Vector yw = data.y.segment(first, len);
        const LinearPredictor fit = fit_method(
            method, Xw, yw, root.child("window", static_cast<std::uint64_t>(oi)).value);
        ForecastReport::Obs o;
        o.origin = data.index[static_cast<std::size_t>(t + 1)];
        o.truth = data.y(t + 1);
        o.prediction = fit.predict(X.row(t + 1).transpose());
        o.benchmark = yw.mean();
        slots[static_cast<std::size_t>(oi)] = std::move(o);
        used[static_cast<std::size_t>(oi)] = 1;
    });
    for (int oi = 0; oi < n_origins; ++oi) {
        if (used[static_cast<std::size_t>(oi)])
            report.observations.push_back(slots[static_cast<std::size_t>(oi)]);
        else
            ++report.skipped_windows;
    }
    if (report.observations.empty())
        throw InvalidInput("run_rolling: no usable windows");
    finalize(report);
    return report;
}

}  // namespace

ForecastReport run_rolling(const Dataset& data, const MethodConfig& method,
                           int window) {
    return run_windows(data, method, window, false);
}

ForecastReport run_expanding(const Dataset& data, const MethodConfig& method,
                             int window) {
    return run_windows(data, method, window, true);
}

ForecastReport run_random_split(const Dataset& data, const MethodConfig& method,
                                double fraction, int repetitions,
                                std::uint64_t seed) {
    const int rows = data.rows();
    if (!(fraction > 0.0 && fraction < 1.0))
        throw InvalidInput("run_random_split: fraction must lie in (0, 1)");
    if (repetitions < 1)
        throw InvalidInput("run_random_split: repetitions must be >= 1");
    const int n_train = static_cast<int>(std::lround(fraction * rows));
    if (n_train < 2 || n_train >= rows)
        throw InvalidInput("run_random_split: degenerate split sizes");
    const Matrix X = maybe_augment(data, method);
    ForecastReport report;
    report.method_label = method.label();
    report.protocol_label = "random_split";
    const SeedPath root{seed};
    std::vector<std::vector<ForecastReport::Obs>> rep_obs(
        static_cast<std::size_t>(repetitions));
    std::vector<double> rep_mse(static_cast<std::size_t>(repetitions), 0.0);
    parallel_for(repetitions, [&](long rep) {
        std::vector<int> idx(static_cast<std::size_t>(rows));
        std::iota(idx.begin(), idx.end(), 0);
        RandomStream shuffle(root.child("rep", static_cast<std::uint64_t>(rep)).value, 0);
        for (int i = rows - 1; i > 0; --i) {
            const auto j = static_cast<int>(
                shuffle.below(static_cast<std::uint64_t>(i),
                              static_cast<std::uint64_t>(i) + 1));
            std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
        Matrix Xt(n_train, X.cols());
        Vector yt(n_train);
        for (int i = 0; i < n_train; ++i) {
            Xt.row(i) = X.row(idx[static_cast<std::size_t>(i)]);
            yt(i) = data.y(idx[static_cast<std::size_t>(i)]);
        }
        const LinearPredictor fit = fit_method(
            method, Xt, yt, root.child("fit", static_cast<std::uint64_t>(rep)).value);
        const double bench = yt.mean();
        auto& obs = rep_obs[static_cast<std::size_t>(rep)];
        double sse = 0.0;
        for (int i = n_train; i < rows; ++i) {
            const int r = idx[static_cast<std::size_t>(i)];
            ForecastReport::Obs o;
            o.origin = "r" + std::to_string(rep) + ":" +
                       data.index[static_cast<std::size_t>(r)];
            o.truth = data.y(r);
            o.prediction = fit.predict(X.row(r).transpose());
            o.benchmark = bench;
            sse += (o.truth - o.prediction) * (o.truth - o.prediction);
            obs.push_back(std::move(o));
        }
        rep_mse[static_cast<std::size_t>(rep)] =
            sse / static_cast<double>(rows - n_train);
    });
    for (auto& obs : rep_obs)
        report.observations.insert(report.observations.end(), obs.begin(), obs.end());
    report.repetition_mse = rep_mse;
    finalize(report);
    // Equal-sized repetitions: aggregate MSE is the mean of per-rep MSEs.
    report.mse = std::accumulate(rep_mse.begin(), rep_mse.end(), 0.0) /
                 static_cast<double>(repetitions);
    return report;
}

ForecastReport run_fixed_split(const Dataset& data, const MethodConfig& method,
                               double fraction) {
    const int rows = data.rows();
    if (!(fraction > 0.0 && fraction < 1.0))
        throw InvalidInput("run_fixed_split: fraction must lie in (0, 1)");
    const int n_train = static_cast<int>(std::lround(fraction * rows));
    if (n_train < 2 || n_train >= rows)
        throw InvalidInput("run_fixed_split: degenerate split sizes");
    const Matrix X = maybe_augment(data, method);
    const Matrix Xt = X.topRows(n_train);
    const Vector yt = data.y.head(n_train);
    const LinearPredictor fit =
        fit_method(method, Xt, yt, SeedPath{method.seed}.child("fixed").value);
    ForecastReport report;
    report.method_label = method.label();
    report.protocol_label = "fixed_split";
    const double bench = yt.mean();
    for (int r = n_train; r < rows; ++r) {
        ForecastReport::Obs o;
        o.origin = data.index[static_cast<std::size_t>(r)];
        o.truth = data.y(r);
        o.prediction = fit.predict(X.row(r).transpose());
        o.benchmark = bench;
        report.observations.push_back(std::move(o));
    }
    finalize(report);
    return report;
}

ForecastReport run_protocol(const Dataset& data, const MethodConfig& method,
                            const Protocol& protocol) {
    protocol.validate(data.rows());
    switch (protocol.kind) {
        case Protocol::Kind::RollingWindow:
            return run_rolling(data, method, protocol.window);
        case Protocol::Kind::ExpandingWindow:
            return run_expanding(data, method, protocol.window);
        case Protocol::Kind::RandomSplit:
            return run_random_split(data, method, protocol.fraction,
                                    protocol.repetitions, protocol.seed);
        case Protocol::Kind::FixedSplit:
            return run_fixed_split(data, method, protocol.fraction);
    }
    throw InvalidInput("run_protocol: unknown protocol kind");
}

void SweepResult::write_csv(std::ostream& os) const {
    os << "method,p,mse,r2\n";
    for (const auto& c : cells)
        os << c.method << ',' << c.p << ',' << format_double(c.mse) << ','
           << format_double(c.r2) << '\n';
}

SweepResult run_sweep(const SweepConfig& config) {
    config.spec.validate();
    SweepResult out;
    if (config.methods.empty()) return out;
    if (config.p_grid.empty()) throw InvalidInput("run_sweep: empty p grid");
    for (int p : config.p_grid)
        if (p < 1 || p > config.spec.p)
            throw InvalidInput("run_sweep: grid p out of [1, spec.p]");
    if (config.replications < 1)
        throw InvalidInput("run_sweep: replications must be >= 1");
    if (config.test_points < 1)
        throw InvalidInput("run_sweep: test_points must be >= 1");

    const std::size_t n_methods = config.methods.size();
    const std::size_t n_p = config.p_grid.size();
    const int reps = config.replications;
    struct CellAcc {
        double sse = 0.0;   // pooled squared error
        double sben = 0.0;  // pooled benchmark squared error
        double mse = 0.0;   // per-replication mean
    };
    std::vector<CellAcc> acc(n_methods * n_p * static_cast<std::size_t>(reps));
    const SeedPath root{config.seed};

    parallel_for(reps, [&](long rep) {
        FactorModelSpec draw = config.spec;
        draw.noise_seed = root.child("rep", static_cast<std::uint64_t>(rep)).value;
        const SimulatedSample sample = draw_sample(draw);
        const OosSample oos = draw_oos(
            config.spec, config.test_points,
            root.child("oos", static_cast<std::uint64_t>(rep)).value);
        const double bench = sample.y.mean();
        double bench_sse = 0.0;
        for (int i = 0; i < config.test_points; ++i)
            bench_sse += (oos.y(i) - bench) * (oos.y(i) - bench);

        for (std::size_t mi = 0; mi < n_methods; ++mi) {
            const MethodConfig& m = config.methods[mi];
            const bool pinned = config.comparators_informative_only &&
                                m.method != Method::PseudoOls;
            double pinned_mse = 0.0;
            bool pinned_done = false;
            for (std::size_t pi = 0; pi < n_p; ++pi) {
                const int p = config.p_grid[pi];
                double cell_sse = 0.0;
                if (pinned) {
                    if (!pinned_done) {
                        const int p_use = std::min(config.spec.p0, config.spec.p);
                        const LinearPredictor fit = fit_method(
                            m, sample.X.leftCols(p_use), sample.y,
                            root.child("fit", static_cast<std::uint64_t>(rep))
                                .child(static_cast<std::uint64_t>(mi))
                                .value);
                        const Vector pred =
                            fit.predict_rows(oos.X.leftCols(p_use));
                        pinned_mse =
                            (oos.y - pred).squaredNorm() / config.test_points;
                        pinned_done = true;
                    }
                    cell_sse = pinned_mse * config.test_points;
                } else {
                    const LinearPredictor fit = fit_method(
                        m, sample.X.leftCols(p), sample.y,
                        root.child("fit", static_cast<std::uint64_t>(rep))
                            .child(static_cast<std::uint64_t>(mi))
                            .child(static_cast<std::uint64_t>(p))
                            .value);
                    const Vector pred = fit.predict_rows(oos.X.leftCols(p));
                    cell_sse = (oos.y - pred).squaredNorm();
                }
                CellAcc& cell =
                    acc[(mi * n_p + pi) * static_cast<std::size_t>(reps) +
                        static_cast<std::size_t>(rep)];
                cell.sse = cell_sse;
                cell.sben = bench_sse;
                cell.mse = cell_sse / config.test_points;
            }
        }
    });

    for (std::size_t mi = 0; mi < n_methods; ++mi)
        for (std::size_t pi = 0; pi < n_p; ++pi) {
            SweepCell cell;
            cell.method = config.methods[mi].label();
            cell.p = config.p_grid[pi];
            double sse = 0.0, sben = 0.0;
            for (int rep = 0; rep < reps; ++rep) {
                const CellAcc& a =
                    acc[(mi * n_p + pi) * static_cast<std::size_t>(reps) +
                        static_cast<std::size_t>(rep)];
                sse += a.sse;
                sben += a.sben;
                cell.rep_mse.push_back(a.mse);
            }
            cell.mse = sse / (static_cast<double>(reps) * config.test_points);
            cell.r2 = sben > 0.0 ? 1.0 - sse / sben
                                 : std::numeric_limits<double>::quiet_NaN();
            out.cells.push_back(std::move(cell));
        }
    return out;
}

}  // namespace noisecast
