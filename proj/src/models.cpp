#include "rome/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "rome/error.hpp"
#include "rome/random.hpp"

namespace rome {

void LabeledDataset::add(FeatureView x, double target) {
    if (dim_ == 0 && targets_.empty()) dim_ = x.size();
    if (x.size() != dim_) {
        throw InvalidInput("feature dimension " + std::to_string(x.size()) + " does not match dataset dimension " +
                           std::to_string(dim_));
    }
    if (!std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); })) {
        throw InvalidInput("non-finite feature value");
    }
    if (!std::isfinite(target)) throw InvalidInput("non-finite target value");
    features_.insert(features_.end(), x.begin(), x.end());
    targets_.push_back(target);
}

void LabeledDataset::reserve(std::size_t rows) {
    features_.reserve(rows * dim_);
    targets_.reserve(rows);
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
    LabeledDataset out(dim_);
    out.reserve(indices.size());
    for (std::size_t i : indices) {
        const FeatureView x = row(i);
        out.features_.insert(out.features_.end(), x.begin(), x.end());
        out.targets_.push_back(targets_[i]);
    }
    return out;
}

void ModelConfig::validate() const {
    if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda)) throw ConfigError("ridge_lambda must be >= 0");
    if (n_trees < 1) throw ConfigError("n_trees must be >= 1");
    if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
    if (!(feature_subsample > 0.0 && feature_subsample <= 1.0)) {
        throw ConfigError("feature_subsample must lie in (0, 1]");
    }
}

ModelConfig tuned_trees() {
    ModelConfig c;
    c.family = ModelFamily::tree_ensemble;
    c.n_trees = 10;
    c.max_depth = 8;
    c.min_samples_leaf = 2;
    c.bagging = true;
    c.feature_subsample = 0.5;
    return c;
}

ModelConfig overfit_trees() {
    ModelConfig c;
    c.family = ModelFamily::tree_ensemble;
    c.n_trees = 1;
    c.max_depth = std::nullopt;
    c.min_samples_leaf = 1;
    c.bagging = false;
    c.feature_subsample = 1.0;
    return c;
}

ModelConfig tuned_linear(double lambda) {
    ModelConfig c;
    c.family = ModelFamily::linear_ridge;
    c.ridge_lambda = lambda;
    return c;
}

ModelConfig overfit_linear() { return tuned_linear(1e-8); }

FittedModel::FittedModel(ModelConfig config, std::size_t dim, std::size_t train_count, State state)
    : config_(std::move(config)),
      dim_(dim),
      train_count_(train_count),
      state_(std::make_shared<const State>(std::move(state))) {}

double FittedModel::predict_raw(FeatureView x) const {
    if (x.size() != dim_) {
        throw InvalidInput("predict: input dimension " + std::to_string(x.size()) + ", model expects " +
                           std::to_string(dim_));
    }
    if (const auto* lin = std::get_if<LinearParams>(state_.get())) {
        double s = lin->intercept;
        for (std::size_t j = 0; j < dim_; ++j) s += lin->weights[j] * x[j];
        return s;
    }
    const auto& trees = std::get<std::vector<RegressionTree>>(*state_);
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(x);
    return s / static_cast<double>(trees.size());
}

double FittedModel::predict(FeatureView x) const {
    const double raw = predict_raw(x);
    if (!std::isfinite(raw)) throw InvalidInput("predict: non-finite model output");
    return std::clamp(raw, 0.0, 1.0);
}

const LinearParams* FittedModel::linear() const noexcept { return std::get_if<LinearParams>(state_.get()); }

std::span<const RegressionTree> FittedModel::trees() const noexcept {
    if (const auto* t = std::get_if<std::vector<RegressionTree>>(state_.get())) return *t;
    return {};
}

FittedModel fit_linear(const LabeledDataset& data, const ModelConfig& config) {
    config.validate();
    if (config.family != ModelFamily::linear_ridge) throw ConfigError("fit_linear needs a linear_ridge config");
    if (data.empty()) throw InvalidInput("fit_linear: empty dataset");

    const auto n = static_cast<Eigen::Index>(data.size());
    const auto d = static_cast<Eigen::Index>(data.dim());
    Eigen::MatrixXd X(n, d);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const FeatureView r = data.row(static_cast<std::size_t>(i));
        for (Eigen::Index j = 0; j < d; ++j) X(i, j) = r[static_cast<std::size_t>(j)];
        y(i) = data.target(static_cast<std::size_t>(i));
    }

    // Centering removes the intercept from the penalized system.
    Eigen::RowVectorXd x_mean = Eigen::RowVectorXd::Zero(d);
    double y_mean = 0.0;
    if (config.fit_intercept) {
        x_mean = X.colwise().mean();
        y_mean = y.mean();
        X.rowwise() -= x_mean;
        y.array() -= y_mean;
    }

    Eigen::MatrixXd gram = X.transpose() * X;
    gram.diagonal().array() += config.ridge_lambda;
    const Eigen::VectorXd rhs = X.transpose() * y;
    // Complete orthogonal decomposition gives the minimum-norm solution when
    // the unpenalized system is singular (e.g. constant features).
    const Eigen::VectorXd w = gram.completeOrthogonalDecomposition().solve(rhs);

    LinearParams params;
    params.weights.assign(w.data(), w.data() + w.size());
    params.intercept = config.fit_intercept ? y_mean - x_mean.dot(w) : 0.0;
    return FittedModel(config, data.dim(), data.size(), std::move(params));
}

FittedModel fit_tree_ensemble(const LabeledDataset& data, const ModelConfig& config) {
    config.validate();
    if (config.family != ModelFamily::tree_ensemble) throw ConfigError("fit_tree_ensemble needs a tree config");
    if (data.empty()) throw InvalidInput("fit_tree_ensemble: empty dataset");

    auto trees = grow_ensemble(data, config);
    return FittedModel(config, data.dim(), data.size(), std::move(trees));
}

FittedModel fit(const LabeledDataset& data, const ModelConfig& config) {
    return config.family == ModelFamily::linear_ridge ? fit_linear(data, config) : fit_tree_ensemble(data, config);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, std::uint64_t seed) {
    if (n < 2) throw InvalidInput("split_disjoint needs at least 2 rows");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t half = (n + 1) / 2;
    std::vector<std::size_t> first(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(half));
    std::vector<std::size_t> second(perm.begin() + static_cast<std::ptrdiff_t>(half), perm.end());
    return {std::move(first), std::move(second)};
}

std::pair<LabeledDataset, LabeledDataset> split_disjoint(const LabeledDataset& data, std::uint64_t seed) {
    auto [a, b] = split_indices(data.size(), seed);
    return {data.subset(a), data.subset(b)};
}

namespace {

double effective_depth(const ModelConfig& c) {
    return c.max_depth ? static_cast<double>(*c.max_depth) : std::numeric_limits<double>::infinity();
}

}  // namespace

bool less_regularized(const ModelConfig& overfit, const ModelConfig& tuned) {
    if (overfit.family != tuned.family) return true;
    if (overfit.family == ModelFamily::linear_ridge) return overfit.ridge_lambda < tuned.ridge_lambda;

    const double d_o = effective_depth(overfit);
    const double d_t = effective_depth(tuned);
    const bool no_more_constrained = d_o >= d_t && overfit.min_samples_leaf <= tuned.min_samples_leaf &&
                                     (!overfit.bagging || tuned.bagging) &&
                                     overfit.feature_subsample >= tuned.feature_subsample;
    const bool strictly_less = d_o > d_t || overfit.min_samples_leaf < tuned.min_samples_leaf ||
                               (tuned.bagging && !overfit.bagging) ||
                               overfit.feature_subsample > tuned.feature_subsample;
    return no_more_constrained && strictly_less;
}

ModelPair fit_pair(const LabeledDataset& data, const ModelConfig& tuned, const ModelConfig& overfit,
                   SplitMode split_mode, std::uint64_t seed) {
    if (!less_regularized(overfit, tuned)) {
        throw ConfigError("overfit model config must be strictly less regularized than the tuned config");
    }
    if (data.empty()) throw InvalidInput("fit_pair: empty dataset");

    ModelConfig f_cfg = tuned;
    ModelConfig g_cfg = overfit;
    f_cfg.seed = derive_seed(seed, 1);
    g_cfg.seed = derive_seed(seed, 2);

    if (split_mode == SplitMode::shared_data) {
        return ModelPair{fit(data, f_cfg), fit(data, g_cfg), split_mode};
    }
    auto [first, second] = split_disjoint(data, derive_seed(seed, 0));
    return ModelPair{fit(first, f_cfg), fit(second, g_cfg), split_mode};
}

}  // namespace rome
