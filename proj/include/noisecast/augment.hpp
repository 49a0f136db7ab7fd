#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "noisecast/estimators.hpp"
#include "noisecast/linalg.hpp"

namespace noisecast {

// Plan for choosing the total predictor count p = round(C * n * sqrt(p0)),
// with the constant C tuned by cross-validation.
struct AugmentPlan {
    enum class GridStyle { Linear, LogSpaced };

    int p0 = 0;
    int n = 0;
    std::vector<double> c_grid;  // ascending positive constants
    GridStyle grid_style = GridStyle::LogSpaced;
    double noise_sigma = 1.0;
    int regenerations = 20;  // R: fresh noise draws per candidate
    std::uint64_t seed = 0;

    void validate() const;

    // 20 log-spaced constants spanning p in [max(p0, 1.2 n), 50 n].
    static std::vector<double> default_c_grid(int p0, int n);
};

struct TuneTrace {
    struct Record {
        double c = 0.0;
        int p = 0;
        double mean_loss = 0.0;
        double std_loss = 0.0;
    };
    std::vector<Record> records;
    double chosen_c = 0.0;
    int chosen_p = 0;

    void write_csv(std::ostream& os) const;  // C,p,mean_loss,std_loss,chosen
};

// Total predictor count implied by C, never below p0.
int p_from_c(const AugmentPlan& plan, double c);

// Cross-sectional tuning: for each candidate C and each noise
// regeneration, append noises and run k-fold CV of pseudo-OLS; the
// chosen C minimizes the mean held-out squared error (ties -> smaller C).
TuneTrace tune_c_kfold(const Matrix& X0, const Vector& y,
                       const AugmentPlan& plan, const CvConfig& cv);

// Time-series tuning: rolling one-step forecasts over the training span
// with fixed window length, summed over origins and regenerations.
TuneTrace tune_c_timeseries(const Matrix& X0, const Vector& y,
                            const AugmentPlan& plan, int window);

// Appends chosen_p - p0 noise columns drawn as single streams spanning
// train and new rows, fits pseudo-OLS on the training block and predicts
// the new rows.
Vector forecast_with_augmentation(const Matrix& X0_train, const Vector& y_train,
                                  const Matrix& X0_new, int chosen_p,
                                  std::uint64_t seed, double noise_sigma = 1.0);

}  // namespace noisecast
