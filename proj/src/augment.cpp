#include "noisecast/augment.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "noisecast/csv.hpp"
#include "noisecast/dgp.hpp"
#include "noisecast/parallel.hpp"
#include "noisecast/rng.hpp"

namespace noisecast {

void AugmentPlan::validate() const {
    if (p0 < 1 || n < 2) throw InvalidInput("AugmentPlan: need p0 >= 1, n >= 2");
    if (c_grid.empty()) throw InvalidInput("AugmentPlan: empty C grid");
    for (double c : c_grid)
        if (!(c > 0.0)) throw InvalidInput("AugmentPlan: C values must be > 0");
    if (!std::is_sorted(c_grid.begin(), c_grid.end()))
        throw InvalidInput("AugmentPlan: C grid must be ascending");
    if (regenerations < 1) throw InvalidInput("AugmentPlan: R must be >= 1");
    if (!(noise_sigma > 0.0))
        throw InvalidInput("AugmentPlan: noise_sigma must be > 0");
}

std::vector<double> AugmentPlan::default_c_grid(int p0, int n) {
    const double base = static_cast<double>(n) * std::sqrt(static_cast<double>(p0));
    const double lo = std::max(static_cast<double>(p0), 1.2 * n) / base;
    const double hi = 50.0 * n / base;
    std::vector<double> grid;
    const int points = 20;
    for (int i = 0; i < points; ++i)
        grid.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1)));
    return grid;
}

int p_from_c(const AugmentPlan& plan, double c) {
    if (!(c > 0.0)) throw InvalidInput("p_from_c: C must be > 0");
    const double target =
        c * static_cast<double>(plan.n) * std::sqrt(static_cast<double>(plan.p0));
    const int p = static_cast<int>(std::llround(target));
    return std::max(p, plan.p0);
}

void TuneTrace::write_csv(std::ostream& os) const {
    os << "C,p,mean_loss,std_loss,chosen\n";
    for (const auto& r : records)
        os << format_double(r.c) << ',' << r.p << ',' << format_double(r.mean_loss)
           << ',' << format_double(r.std_loss) << ','
           << (r.c == chosen_c ? 1 : 0) << '\n';
}

namespace {

struct LossStats {
    double mean = 0.0;
    double stddev = 0.0;
};

LossStats summarize(const std::vector<double>& losses) {
    LossStats s;
    if (losses.empty()) return s;
    for (double v : losses) s.mean += v;
    s.mean /= static_cast<double>(losses.size());
    if (losses.size() > 1) {
        double ss = 0.0;
        for (double v : losses) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(losses.size() - 1));
    }
    return s;
}

TuneTrace choose(const AugmentPlan& plan,
                 const std::vector<std::vector<double>>& losses_per_c) {
    TuneTrace trace;
    for (std::size_t ci = 0; ci < plan.c_grid.size(); ++ci) {
        const LossStats s = summarize(losses_per_c[ci]);
        trace.records.push_back({plan.c_grid[ci], p_from_c(plan, plan.c_grid[ci]),
                                 s.mean, s.stddev});
    }
    // Ascending grid + strict improvement = ties break to the smaller C.
    std::size_t best = 0;
    for (std::size_t ci = 1; ci < trace.records.size(); ++ci)
        if (trace.records[ci].mean_loss < trace.records[best].mean_loss) best = ci;
    trace.chosen_c = trace.records[best].c;
    trace.chosen_p = trace.records[best].p;
    return trace;
}

}  // namespace

TuneTrace tune_c_kfold(const Matrix& X0, const Vector& y,
                       const AugmentPlan& plan, const CvConfig& cv) {
    plan.validate();
    if (X0.cols() != plan.p0)
        throw InvalidInput("tune_c_kfold: X0 must have p0 columns");
    if (X0.rows() != plan.n || y.size() != plan.n)
        throw InvalidInput("tune_c_kfold: rows must equal plan.n");
    const std::size_t n_c = plan.c_grid.size();
    const int R = plan.regenerations;
    std::vector<std::vector<double>> losses(n_c);
    for (auto& v : losses)
        v.assign(static_cast<std::size_t>(R) * static_cast<std::size_t>(cv.folds), 0.0);
    const SeedPath root{plan.seed};

    parallel_for(static_cast<long>(n_c) * R, [&](long cell) {
        const auto ci = static_cast<std::size_t>(cell / R);
        const int r = static_cast<int>(cell % R);
        const int p = p_from_c(plan, plan.c_grid[ci]);
        const Matrix Xaug = augment_with_noise(
            X0, p - plan.p0, plan.noise_sigma,
            root.child("noise", static_cast<std::uint64_t>(ci))
                .child(static_cast<std::uint64_t>(r))
                .value);
        CvConfig cv_r = cv;
        cv_r.seed = SeedPath{cv.seed}.child("fold", static_cast<std::uint64_t>(r)).value;
        const auto folds = make_folds(plan.n, cv_r);
        for (std::size_t f = 0; f < folds.size(); ++f) {
            const auto& fold = folds[f];
            Matrix Xt(fold.train.size(), Xaug.cols());
            Vector yt(fold.train.size());
            for (std::size_t i = 0; i < fold.train.size(); ++i) {
                Xt.row(static_cast<Eigen::Index>(i)) = Xaug.row(fold.train[i]);
                yt(static_cast<Eigen::Index>(i)) = y(fold.train[i]);
            }
            const LinearPredictor fit = fit_pseudo_ols(Xt, yt);
            double sse = 0.0;
            for (int v : fold.val) {
                const double err = y(v) - fit.predict(Xaug.row(v).transpose());
                sse += err * err;
            }
            losses[ci][static_cast<std::size_t>(r) * folds.size() + f] =
                sse / static_cast<double>(fold.val.size());
        }
    });
    return choose(plan, losses);
}

TuneTrace tune_c_timeseries(const Matrix& X0, const Vector& y,
                            const AugmentPlan& plan, int window) {
    plan.validate();
    if (X0.cols() != plan.p0)
        throw InvalidInput("tune_c_timeseries: X0 must have p0 columns");
    if (X0.rows() != plan.n || y.size() != plan.n)
        throw InvalidInput("tune_c_timeseries: rows must equal plan.n");
    if (window < 2 || window >= plan.n)
        throw InvalidInput("tune_c_timeseries: need 2 <= window < n");
    const std::size_t n_c = plan.c_grid.size();
    const int R = plan.regenerations;
    const int origins = plan.n - window;  // forecasts for rows window..n-1
    std::vector<std::vector<double>> losses(n_c);
    for (auto& v : losses) v.assign(static_cast<std::size_t>(R), 0.0);
    const SeedPath root{plan.seed};

    parallel_for(static_cast<long>(n_c) * R, [&](long cell) {
        const auto ci = static_cast<std::size_t>(cell / R);
        const int r = static_cast<int>(cell % R);
        const int p = p_from_c(plan, plan.c_grid[ci]);
        const Matrix Xaug = augment_with_noise(
            X0, p - plan.p0, plan.noise_sigma,
            root.child("noise", static_cast<std::uint64_t>(ci))
                .child(static_cast<std::uint64_t>(r))
                .value);
        double sse = 0.0;
        for (int t = window - 1; t + 1 < plan.n; ++t) {
            const Matrix Xw = Xaug.middleRows(t - window + 1, window);
            const Vector yw = y.segment(t - window + 1, window);
            const LinearPredictor fit = fit_pseudo_ols(Xw, yw);
            const double err = y(t + 1) - fit.predict(Xaug.row(t + 1).transpose());
            sse += err * err;
        }
        losses[ci][static_cast<std::size_t>(r)] = sse / origins;
    });
    return choose(plan, losses);
}

Vector forecast_with_augmentation(const Matrix& X0_train, const Vector& y_train,
                                  const Matrix& X0_new, int chosen_p,
                                  std::uint64_t seed, double noise_sigma) {
    if (X0_train.cols() != X0_new.cols())
        throw InvalidInput("forecast_with_augmentation: column mismatch");
    if (y_train.size() != X0_train.rows())
        throw InvalidInput("forecast_with_augmentation: length(Y) != rows(X)");
    const int p0 = static_cast<int>(X0_train.cols());
    if (chosen_p < p0)
        throw InvalidInput("forecast_with_augmentation: chosen_p below p0");
    const Eigen::Index n_train = X0_train.rows();
    const Eigen::Index n_new = X0_new.rows();
    Matrix stacked(n_train + n_new, p0);
    stacked.topRows(n_train) = X0_train;
    stacked.bottomRows(n_new) = X0_new;
    const Matrix full =
        augment_with_noise(stacked, chosen_p - p0, noise_sigma, seed);
    const LinearPredictor fit =
        fit_pseudo_ols(full.topRows(n_train), y_train);
    return fit.predict_rows(full.bottomRows(n_new));
}

}  // namespace noisecast
