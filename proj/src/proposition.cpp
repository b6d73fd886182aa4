#include "rome/proposition.hpp"

#include <algorithm>
#include <cmath>

#include "rome/error.hpp"
#include "rome/random.hpp"

namespace rome {

PropositionReport verify_proposition(const PropositionSetup& setup) {
    if (setup.n_draws < 1) throw InvalidInput("verify_proposition needs at least one draw");
    if (setup.probes.empty()) throw InvalidInput("verify_proposition needs probe points");
    const std::size_t n_probes = setup.probes.size();

    std::vector<double> sum_s2(n_probes, 0.0), sum_f_err2(n_probes, 0.0), sum_g(n_probes, 0.0),
        sum_g2(n_probes, 0.0);
    std::vector<double> g_first(n_probes, 0.0);  // shift for a stable variance
    double x[1];

    for (std::size_t d = 0; d < setup.n_draws; ++d) {
        const LabeledDataset data = gen_toy(setup.spec, derive_seed(setup.seed, d, 0));
        const auto [first, second] = split_disjoint(data, derive_seed(setup.seed, d, 1));
        ModelConfig f_cfg = setup.tuned;
        ModelConfig g_cfg = setup.overfit;
        f_cfg.seed = derive_seed(setup.seed, d, 2);
        g_cfg.seed = derive_seed(setup.seed, d, 3);
        std::optional<FittedModel> f;
        if (!setup.frozen_f) f = fit(first, f_cfg);
        const FittedModel g = fit(second, g_cfg);

        for (std::size_t p = 0; p < n_probes; ++p) {
            x[0] = setup.probes[p];
            const double h = setup.spec.truth(x[0]);
            const double fv = f ? f->predict_raw(x) : *setup.frozen_f;
            const double gv = g.predict_raw(x);
            if (d == 0) g_first[p] = gv;
            sum_s2[p] += (fv - gv) * (fv - gv);
            sum_f_err2[p] += (fv - h) * (fv - h);
            sum_g[p] += gv - g_first[p];
            sum_g2[p] += (gv - g_first[p]) * (gv - g_first[p]);
        }
    }

    PropositionReport report;
    const auto n = static_cast<double>(setup.n_draws);
    for (std::size_t p = 0; p < n_probes; ++p) {
        ProbeResult r;
        r.x = setup.probes[p];
        r.lhs = sum_s2[p] / n;
        r.mse_f = sum_f_err2[p] / n;
        r.var_g = setup.n_draws > 1 ? (sum_g2[p] - sum_g[p] * sum_g[p] / n) / (n - 1.0) : 0.0;
        r.rhs = r.mse_f + r.var_g;
        r.rel_error = r.rhs > 0.0 ? std::abs(r.lhs - r.rhs) / r.rhs : std::abs(r.lhs - r.rhs);
        report.max_rel_error = std::max(report.max_rel_error, r.rel_error);
        report.probes.push_back(r);
    }
    return report;
}

FeatureVector polynomial_features(double x, std::size_t degree) {
    FeatureVector out(degree);
    double p = 1.0;
    for (std::size_t k = 0; k < degree; ++k) {
        p *= x;
        out[k] = p;
    }
    return out;
}

LabeledDataset polynomial_features(const LabeledDataset& data, std::size_t degree) {
    if (data.dim() != 1) throw InvalidInput("polynomial features need one-dimensional inputs");
    LabeledDataset out(degree);
    out.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.add(polynomial_features(data.row(i)[0], degree), data.target(i));
    return out;
}

UncertaintyProfiles compare_uncertainty_maps(const SyntheticSpec& spec, std::uint64_t seed,
                                             const UncertaintyOptions& options) {
    if (options.degree < 1) throw InvalidInput("polynomial degree must be >= 1");
    if (options.grid_points < 2) throw InvalidInput("grid needs at least two points");

    UncertaintyProfiles out;
    out.samples = gen_toy(spec, derive_seed(seed, 0));
    const LabeledDataset expanded = polynomial_features(out.samples, options.degree);
    const auto [first, second] = split_indices(expanded.size(), derive_seed(seed, 1));
    out.split.assign(expanded.size(), 0);
    for (std::size_t i : second) out.split[i] = 1;

    if (!less_regularized(options.overfit, options.tuned)) {
        throw ConfigError("overfit model config must be strictly less regularized than the tuned config");
    }
    const FittedModel f = fit(expanded.subset(first), options.tuned);
    const FittedModel g = fit(expanded.subset(second), options.overfit);

    // Squared-error model: same features and regularization as f, trained on
    // f's squared residuals over every sample.
    LabeledDataset sq_err(options.degree);
    sq_err.reserve(expanded.size());
    for (std::size_t i = 0; i < expanded.size(); ++i) {
        const double e = f.predict_raw(expanded.row(i)) - expanded.target(i);
        sq_err.add(expanded.row(i), e * e);
    }
    const FittedModel err_model = fit(sq_err, options.tuned);

    const double step = (options.grid_hi - options.grid_lo) / static_cast<double>(options.grid_points - 1);
    for (std::size_t k = 0; k < options.grid_points; ++k) {
        const double x = options.grid_lo + step * static_cast<double>(k);
        const FeatureVector phi = polynomial_features(x, options.degree);
        const double fv = f.predict_raw(phi);
        const double gv = g.predict_raw(phi);
        const double e2 = err_model.predict_raw(phi);
        out.grid.push_back(x);
        out.truth.push_back(spec.truth(x));
        out.f.push_back(fv);
        out.g.push_back(gv);
        out.residual.push_back(std::abs(fv - gv));
        out.predicted_sq_error.push_back(e2);
        out.rmse.push_back(std::sqrt(std::max(e2, 0.0)));
    }
    return out;
}

}  // namespace rome
