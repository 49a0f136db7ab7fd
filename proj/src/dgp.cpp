#include "noisecast/dgp.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "noisecast/rng.hpp"

namespace noisecast {

namespace {

// Stream ids within a seed namespace.  Factors occupy streams [0, K),
// the outcome noise one stream, idiosyncratics one stream per column.
constexpr std::uint64_t kEpsStream = 0x0100000000ULL;
constexpr std::uint64_t kUStreamBase = 0x0200000000ULL;

Matrix draw_factors(std::uint64_t seed, int rows, int K) {
    Matrix F(rows, K);
    for (int k = 0; k < K; ++k) {
        RandomStream s(seed, static_cast<std::uint64_t>(k));
        for (int t = 0; t < rows; ++t) F(t, k) = s.normal(t);
    }
    return F;
}

}  // namespace

void FactorModelSpec::validate() const {
    if (n < 1) throw InvalidInput("FactorModelSpec: n must be >= 1");
    if (!(1 <= K && K <= p0 && p0 <= p))
        throw InvalidInput("FactorModelSpec: need 1 <= K <= p0 <= p");
    if (!(tau >= 0.0 && tau <= 0.5))
        throw InvalidInput("FactorModelSpec: tau must lie in [0, 1/2]");
    if (rho.size() != K)
        throw InvalidInput("FactorModelSpec: rho must have length K");
    if (!(sigma_eps > 0.0) || !(sigma_u > 0.0))
        throw InvalidInput("FactorModelSpec: sigma_eps and sigma_u must be > 0");
}

Matrix loadings_for(const FactorModelSpec& spec) {
    spec.validate();
    Matrix Lambda = Matrix::Zero(spec.p, spec.K);
    const double scale = std::pow(static_cast<double>(spec.p0), -spec.tau);
    for (int k = 0; k < spec.K; ++k) {
        RandomStream s(spec.loading_seed, static_cast<std::uint64_t>(k));
        for (int i = 0; i < spec.p0; ++i) Lambda(i, k) = scale * s.normal(i);
    }
    return Lambda;
}

SimulatedSample draw_sample(const FactorModelSpec& spec) {
    spec.validate();
    SimulatedSample out;
    out.Lambda = loadings_for(spec);
    out.F = draw_factors(spec.noise_seed, spec.n, spec.K);
    RandomStream eps(spec.noise_seed, kEpsStream);
    out.y.resize(spec.n);
    for (int t = 0; t < spec.n; ++t)
        out.y(t) = out.F.row(t).dot(spec.rho) + spec.sigma_eps * eps.normal(t);
    out.U.resize(spec.n, spec.p);
    for (int i = 0; i < spec.p; ++i) {
        RandomStream s(spec.noise_seed, kUStreamBase + i);
        for (int t = 0; t < spec.n; ++t) out.U(t, i) = spec.sigma_u * s.normal(t);
    }
    out.X = out.F * out.Lambda.transpose() + out.U;
    return out;
}

OosSample draw_oos(const FactorModelSpec& spec, int count, std::uint64_t seed) {
    spec.validate();
    if (count < 0) throw InvalidInput("draw_oos: count must be >= 0");
    OosSample out;
    const Matrix Lambda = loadings_for(spec);
    out.F = draw_factors(seed, count, spec.K);
    RandomStream eps(seed, kEpsStream);
    out.y.resize(count);
    for (int t = 0; t < count; ++t)
        out.y(t) = out.F.row(t).dot(spec.rho) + spec.sigma_eps * eps.normal(t);
    out.X.resize(count, spec.p);
    for (int i = 0; i < spec.p; ++i) {
        RandomStream s(seed, kUStreamBase + i);
        for (int t = 0; t < count; ++t)
            out.X(t, i) = spec.sigma_u * s.normal(t);
    }
    out.X += out.F * Lambda.transpose();
    return out;
}

Matrix augment_with_noise(const Matrix& X, int extra, double sigma,
                          std::uint64_t seed) {
    if (extra < 0) throw InvalidInput("augment_with_noise: extra must be >= 0");
    if (!(sigma > 0.0))
        throw InvalidInput("augment_with_noise: sigma must be > 0");
    if (extra == 0) return X;
    const Eigen::Index n = X.rows();
    Matrix out(n, X.cols() + extra);
    out.leftCols(X.cols()) = X;
    for (int j = 0; j < extra; ++j) {
        RandomStream s(seed, static_cast<std::uint64_t>(j));
        for (Eigen::Index t = 0; t < n; ++t)
            out(t, X.cols() + j) = sigma * s.normal(static_cast<std::uint64_t>(t));
    }
    return out;
}

nlohmann::json spec_to_json(const FactorModelSpec& spec) {
    nlohmann::json j;
    j["n"] = spec.n;
    j["p"] = spec.p;
    j["p0"] = spec.p0;
    j["K"] = spec.K;
    j["tau"] = spec.tau;
    j["rho"] = std::vector<double>(spec.rho.data(), spec.rho.data() + spec.rho.size());
    j["sigma_eps"] = spec.sigma_eps;
    j["sigma_u"] = spec.sigma_u;
    j["loading_seed"] = spec.loading_seed;
    j["noise_seed"] = spec.noise_seed;
    return j;
}

FactorModelSpec spec_from_json(const nlohmann::json& j) {
    FactorModelSpec spec;
    try {
        spec.n = j.at("n").get<int>();
        spec.p = j.at("p").get<int>();
        spec.p0 = j.at("p0").get<int>();
        spec.K = j.at("K").get<int>();
        spec.tau = j.at("tau").get<double>();
        auto rho = j.at("rho").get<std::vector<double>>();
        spec.rho = Eigen::Map<const Vector>(rho.data(),
                                            static_cast<Eigen::Index>(rho.size()));
        spec.sigma_eps = j.at("sigma_eps").get<double>();
        spec.sigma_u = j.at("sigma_u").get<double>();
        spec.loading_seed = j.at("loading_seed").get<std::uint64_t>();
        spec.noise_seed = j.at("noise_seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("FactorModelSpec JSON: ") + e.what());
    }
    spec.validate();
    return spec;
}

}  // namespace noisecast
