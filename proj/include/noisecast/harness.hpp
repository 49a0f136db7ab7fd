#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "noisecast/augment.hpp"
#include "noisecast/dataio.hpp"
#include "noisecast/dgp.hpp"
#include "noisecast/estimators.hpp"

namespace noisecast {

struct Protocol {
    enum class Kind { RandomSplit, FixedSplit, RollingWindow, ExpandingWindow };

    Kind kind = Kind::RollingWindow;
    int window = 0;          // rolling / expanding (minimum) window length
    double fraction = 0.5;   // random / fixed split train share
    int repetitions = 1;     // random split only
    std::uint64_t seed = 0;

    void validate(int rows) const;
};

std::string protocol_kind_name(Protocol::Kind k);
Protocol::Kind protocol_kind_from_name(const std::string& name);

// How to fit the forecaster inside a protocol.
struct MethodConfig {
    Method method = Method::PseudoOls;
    int augment_to_p = 0;      // pseudo-OLS: total columns after noise merge
    double noise_sigma = 1.0;
    CvConfig cv;               // ridge / lasso tuning
    std::optional<int> pca_k;
    bool standardize_pseudo = false;
    std::uint64_t seed = 0;

    std::string label() const;
};

struct R2Pair {
    double truth = 0.0;
    double prediction = 0.0;
    double benchmark = 0.0;  // per-window in-sample mean
};

// Out-of-sample R^2 = 1 - sum (truth - prediction)^2 / sum (truth -
// benchmark)^2.  A 0/0 ratio (constant target perfectly matched by the
// benchmark) counts as R^2 = 0.
double oos_r2(const std::vector<R2Pair>& pairs);

struct ForecastReport {
    struct Obs {
        std::string origin;
        double truth = 0.0;
        double prediction = 0.0;
        double benchmark = 0.0;
    };
    std::vector<Obs> observations;
    double mse = 0.0;
    double r2 = 0.0;
    std::string method_label;
    std::string protocol_label;
    int skipped_windows = 0;
    std::vector<double> repetition_mse;  // random split: one entry per rep
    std::optional<TuneTrace> tune;

    nlohmann::json to_json() const;
    void write_csv(std::ostream& os) const;  // origin,truth,prediction,benchmark
};

// Fixed-length moving window: fit on rows (t-window+1 .. t), forecast the
// target of row t+1 from that row's predictors.  Windows containing
// non-finite values are skipped and counted.
ForecastReport run_rolling(const Dataset& data, const MethodConfig& method,
                           int window);

// Same origins but the training set grows from `window` rows onward.
ForecastReport run_expanding(const Dataset& data, const MethodConfig& method,
                             int window);

// Repeated random train/test splits with averaged test MSE.
ForecastReport run_random_split(const Dataset& data, const MethodConfig& method,
                                double fraction, int repetitions,
                                std::uint64_t seed);

// Deterministic leading-fraction split.
ForecastReport run_fixed_split(const Dataset& data, const MethodConfig& method,
                               double fraction);

ForecastReport run_protocol(const Dataset& data, const MethodConfig& method,
                            const Protocol& protocol);

// Simulation sweep over the predictor-count grid (figure pipelines).
struct SweepConfig {
    FactorModelSpec spec;      // spec.p is the grid maximum
    std::vector<int> p_grid;
    int replications = 50;
    int test_points = 50;
    std::vector<MethodConfig> methods;
    // When set, non-pseudo-OLS methods always use the p0 informative
    // columns regardless of p (known-identities design).
    bool comparators_informative_only = false;
    std::uint64_t seed = 0;
};

struct SweepCell {
    std::string method;
    int p = 0;
    double mse = 0.0;  // mean over replications
    double r2 = 0.0;   // pooled over replications
    std::vector<double> rep_mse;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    void write_csv(std::ostream& os) const;  // method,p,mse,r2
};

SweepResult run_sweep(const SweepConfig& config);

}  // namespace noisecast
