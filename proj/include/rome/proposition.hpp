#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "rome/environments.hpp"
#include "rome/models.hpp"

namespace rome {

struct PropositionSetup {
    SyntheticSpec spec = linear_gaussian_spec();
    ModelConfig tuned = tuned_linear(20.0);
    ModelConfig overfit = overfit_linear();
    std::size_t n_draws = 10000;
    std::vector<double> probes{-1.5, -0.75, 0.0, 0.75, 1.5};
    std::uint64_t seed = 0;
    /// Replace f by this constant (a zero-variance estimator).
    std::optional<double> frozen_f;
};

struct ProbeResult {
    double x = 0.0;
    double lhs = 0.0;     // mean over draws of (f - g)^2
    double mse_f = 0.0;   // mean over draws of (f - h)^2
    double var_g = 0.0;   // sample variance over draws of g
    double rhs = 0.0;     // mse_f + var_g
    double rel_error = 0.0;
};

struct PropositionReport {
    std::vector<ProbeResult> probes;
    double max_rel_error = 0.0;
};

/// Monte-Carlo check that the expected squared residual overfit equals the
/// tuned model's MSE plus the overfit model's variance when the two are fit
/// on disjoint halves of each redrawn dataset.
PropositionReport verify_proposition(const PropositionSetup& setup);

/// [x, x^2, ..., x^degree] for one-dimensional inputs.
FeatureVector polynomial_features(double x, std::size_t degree);
LabeledDataset polynomial_features(const LabeledDataset& data, std::size_t degree);

struct UncertaintyOptions {
    std::size_t degree = 3;
    ModelConfig tuned = tuned_linear(1.0);
    ModelConfig overfit = overfit_linear();
    double grid_lo = -1.5;
    double grid_hi = 1.5;
    std::size_t grid_points = 121;
};

struct UncertaintyProfiles {
    std::vector<double> grid;
    std::vector<double> truth;
    std::vector<double> f;
    std::vector<double> g;
    std::vector<double> residual;       // |f - g|
    std::vector<double> predicted_sq_error;  // squared-error model output
    std::vector<double> rmse;           // sqrt(max(0, predicted_sq_error))
    LabeledDataset samples;
    std::vector<std::uint8_t> split;    // 0: trained f, 1: trained g
};

/// Fits a disjoint-split polynomial pair on gen_toy(spec, seed) and,
/// separately, a model of f's squared error; evaluates both on the grid.
UncertaintyProfiles compare_uncertainty_maps(const SyntheticSpec& spec, std::uint64_t seed,
                                             const UncertaintyOptions& options = {});

}  // namespace rome
