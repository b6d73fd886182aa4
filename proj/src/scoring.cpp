#include "rome/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "rome/error.hpp"

namespace rome {

namespace {

void require_finite(double f, double g) {
    if (!std::isfinite(f) || !std::isfinite(g)) throw InvalidInput("prediction must be finite");
}

double clamp_prob(double p, double eps) { return std::clamp(p, eps, 1.0 - eps); }

}  // namespace

void ScoreConfig::validate() const {
    if (!std::isfinite(alpha) || alpha < 0.0) throw ConfigError("alpha must be finite and >= 0");
    if (!(eps_prob > 0.0 && eps_prob < 0.5)) throw ConfigError("eps_prob must lie in (0, 0.5)");
    if (!(eps_var > 0.0) || !std::isfinite(eps_var)) throw ConfigError("eps_var must be positive");
    if (!(max_var_fraction > 0.0 && max_var_fraction < 1.0)) throw ConfigError("max_var_fraction must lie in (0, 1)");
}

double residual_overfit(double f_pred, double g_pred) {
    require_finite(f_pred, g_pred);
    return std::abs(f_pred - g_pred);
}

double ucb_score(double f_pred, double g_pred, const ScoreConfig& cfg) {
    const double base = cfg.pure_exploration ? 0.0 : f_pred;
    return base + cfg.alpha * residual_overfit(f_pred, g_pred);
}

BetaParams beta_moment_match(double f_pred, double g_pred, const ScoreConfig& cfg) {
    require_finite(f_pred, g_pred);
    const double m = clamp_prob(f_pred, cfg.eps_prob);
    const double bernoulli_var = m * (1.0 - m);
    const double cap = cfg.max_var_fraction * bernoulli_var;
    const double diff = f_pred - g_pred;
    const double v = std::clamp(diff * diff, std::min(cfg.eps_var, cap), cap);
    const double k = bernoulli_var / v - 1.0;
    return BetaParams{m * k, (1.0 - m) * k};
}

double sample_beta(const BetaParams& params, Rng& rng) {
    const double x = std::gamma_distribution<double>(params.a, 1.0)(rng);
    const double y = std::gamma_distribution<double>(params.b, 1.0)(rng);
    // Tiny shapes can underflow a gamma draw to zero.
    if (x == 0.0 && y == 0.0) return params.a >= params.b ? std::nextafter(1.0, 0.0) : std::numeric_limits<double>::min();
    const double p = x / (x + y);
    return std::clamp(p, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

double ts_score(double f_pred, double g_pred, const ScoreConfig& cfg, Rng& rng) {
    return sample_beta(beta_moment_match(f_pred, g_pred, cfg), rng);
}

double beta_ucb(const BetaParams& params, double alpha) {
    return params.mean() + alpha * std::sqrt(params.variance());
}

double info_gain_gaussian(double f_pred, double g_pred, double sigma2) {
    require_finite(f_pred, g_pred);
    if (!(sigma2 > 0.0)) throw InvalidInput("sigma2 must be positive");
    const double d = f_pred - g_pred;
    return d * d / (2.0 * sigma2);
}

double info_gain_bernoulli(double f_pred, double g_pred, const ScoreConfig& cfg) {
    require_finite(f_pred, g_pred);
    const double f = clamp_prob(f_pred, cfg.eps_prob);
    const double g = clamp_prob(g_pred, cfg.eps_prob);
    if (f == g) return 0.0;
    const double kl = g * std::log(g / f) + (1.0 - g) * std::log((1.0 - g) / (1.0 - f));
    return std::max(kl, 0.0);
}

double info_gain_poisson(double f_rate, double g_rate) {
    require_finite(f_rate, g_rate);
    if (!(f_rate > 0.0) || !(g_rate > 0.0)) throw InvalidInput("Poisson rates must be positive");
    if (f_rate == g_rate) return 0.0;
    return std::max(g_rate * std::log(g_rate / f_rate) + f_rate - g_rate, 0.0);
}

}  // namespace rome
