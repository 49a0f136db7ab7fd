#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "noisecast/linalg.hpp"

namespace noisecast {

// Latent-factor data generating process.  The first p0 predictors load on
// K common factors with loadings lambda_i = lambda_{i,0} * p0^{-tau}; the
// remaining p - p0 columns are pure idiosyncratic noise.  All primitive
// draws are standard normal, scaled by sigma_eps / sigma_u.
struct FactorModelSpec {
    int n = 0;
    int p = 0;
    int p0 = 0;
    int K = 0;
    double tau = 0.0;  // factor-strength exponent, in [0, 1/2]
    Vector rho;        // K outcome loadings
    double sigma_eps = 1.0;
    double sigma_u = 1.0;
    std::uint64_t loading_seed = 1;
    std::uint64_t noise_seed = 2;

    void validate() const;  // throws InvalidInput
};

struct SimulatedSample {
    Matrix X;       // n x p, X = F * Lambda' + U exactly
    Vector y;       // n, y = F * rho + eps
    Matrix F;       // n x K
    Matrix Lambda;  // p x K, rows p0..p-1 zero
    Matrix U;       // n x p
};

struct OosSample {
    Matrix X;  // count x p
    Vector y;  // count
    Matrix F;  // count x K
};

// Loadings are a function of (loading_seed, p0, tau) only, so they stay
// fixed across Monte-Carlo replications and nest as p grows.
Matrix loadings_for(const FactorModelSpec& spec);

SimulatedSample draw_sample(const FactorModelSpec& spec);

// Fresh draws from the same DGP, driven by a caller-supplied seed so they
// are independent of the in-sample streams.
OosSample draw_oos(const FactorModelSpec& spec, int count, std::uint64_t seed);

// Appends `extra` columns of i.i.d. N(0, sigma^2) draws.  Each appended
// column is its own stream indexed by row, so augmenting commutes with
// taking row prefixes.
Matrix augment_with_noise(const Matrix& X, int extra, double sigma,
                          std::uint64_t seed);

nlohmann::json spec_to_json(const FactorModelSpec& spec);
FactorModelSpec spec_from_json(const nlohmann::json& j);

}  // namespace noisecast
