#pragma once

#include "rome/random.hpp"

namespace rome {

/// Beta pseudo-counts. Both strictly positive.
struct BetaParams {
    double a = 1.0;
    double b = 1.0;

    double mean() const noexcept { return a / (a + b); }
    double variance() const noexcept {
        const double s = a + b;
        return a * b / (s * s * (s + 1.0));
    }
};

struct ScoreConfig {
    double alpha = 1.0;
    bool pure_exploration = false;
    double eps_prob = 1e-3;          // probabilities are clamped to [eps, 1 - eps]
    double eps_var = 1e-6;           // variance floor
    double max_var_fraction = 0.99;  // variance cap as a fraction of m(1 - m)

    void validate() const;
};

/// |f - g|.
double residual_overfit(double f_pred, double g_pred);

/// f + alpha |f - g|, or alpha |f - g| in pure exploration mode.
double ucb_score(double f_pred, double g_pred, const ScoreConfig& cfg);

/// Beta whose mean is the clamped f and whose variance is the clamped (f - g)^2.
///
/// The variance is capped below m(1 - m) rather than taking the absolute
/// value of a negative pseudo-count factor, so the mean is always preserved.
BetaParams beta_moment_match(double f_pred, double g_pred, const ScoreConfig& cfg);

/// One draw from the moment-matched Beta; strictly inside (0, 1).
double ts_score(double f_pred, double g_pred, const ScoreConfig& cfg, Rng& rng);

double sample_beta(const BetaParams& params, Rng& rng);

/// mean + alpha * standard deviation.
double beta_ucb(const BetaParams& params, double alpha);

/// Gaussian approximate information gain, (f - g)^2 / (2 sigma2). With
/// sigma2 = 1/2 it equals the squared residual overfit.
double info_gain_gaussian(double f_pred, double g_pred, double sigma2 = 0.5);

/// KL(Bernoulli(g) || Bernoulli(f)) after clamping both to [eps, 1 - eps].
double info_gain_bernoulli(double f_pred, double g_pred, const ScoreConfig& cfg = {});

/// g log(g / f) + f - g for positive rates.
double info_gain_poisson(double f_rate, double g_rate);

}  // namespace rome
