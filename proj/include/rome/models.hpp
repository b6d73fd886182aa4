#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

namespace rome {

using FeatureVector = std::vector<double>;
using FeatureView = std::span<const double>;

/// Row-major table of (features, target) pairs sharing one dimension.
class LabeledDataset {
public:
    LabeledDataset() = default;
    explicit LabeledDataset(std::size_t dim) : dim_(dim) {}

    /// Throws InvalidInput on a dimension mismatch or non-finite value.
    void add(FeatureView x, double target);
    void reserve(std::size_t rows);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return targets_.size(); }
    bool empty() const noexcept { return targets_.empty(); }

    FeatureView row(std::size_t i) const { return {features_.data() + i * dim_, dim_}; }
    double target(std::size_t i) const { return targets_[i]; }
    std::span<const double> targets() const noexcept { return targets_; }

    LabeledDataset subset(std::span<const std::size_t> indices) const;

private:
    std::size_t dim_ = 0;
    std::vector<double> features_;
    std::vector<double> targets_;
};

enum class ModelFamily { linear_ridge, tree_ensemble };

struct ModelConfig {
    ModelFamily family = ModelFamily::tree_ensemble;
    double ridge_lambda = 1.0;
    bool fit_intercept = true;
    std::size_t n_trees = 10;
    std::optional<std::size_t> max_depth;  // nullopt: unlimited; 0: a single leaf
    std::size_t min_samples_leaf = 1;
    bool bagging = true;
    double feature_subsample = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Regularized configurations used as f (tuned) and g (overfit) by default.
ModelConfig tuned_trees();
ModelConfig overfit_trees();
ModelConfig tuned_linear(double lambda = 1.0);
ModelConfig overfit_linear();

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;
};

class RegressionTree {
public:
    RegressionTree() = default;
    explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

    double predict(FeatureView x) const;
    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t depth() const;
    std::span<const TreeNode> nodes() const noexcept { return nodes_; }

private:
    std::vector<TreeNode> nodes_;
};

struct LinearParams {
    std::vector<double> weights;
    double intercept = 0.0;
};

/// Immutable fitted estimator. Copies share the learned state.
class FittedModel {
public:
    const ModelConfig& config() const noexcept { return config_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t train_count() const noexcept { return train_count_; }

    /// Prediction clipped to [0, 1].
    double predict(FeatureView x) const;
    /// Unclipped prediction (linear output or mean leaf value).
    double predict_raw(FeatureView x) const;

    const LinearParams* linear() const noexcept;
    std::span<const RegressionTree> trees() const noexcept;

private:
    using State = std::variant<LinearParams, std::vector<RegressionTree>>;

    FittedModel(ModelConfig config, std::size_t dim, std::size_t train_count, State state);

    ModelConfig config_;
    std::size_t dim_ = 0;
    std::size_t train_count_ = 0;
    std::shared_ptr<const State> state_;

    friend FittedModel fit_linear(const LabeledDataset&, const ModelConfig&);
    friend FittedModel fit_tree_ensemble(const LabeledDataset&, const ModelConfig&);
};

FittedModel fit_linear(const LabeledDataset& data, const ModelConfig& config);
FittedModel fit_tree_ensemble(const LabeledDataset& data, const ModelConfig& config);
/// Dispatches on config.family.
FittedModel fit(const LabeledDataset& data, const ModelConfig& config);

inline double predict(const FittedModel& model, FeatureView x) { return model.predict(x); }

/// Grows one CART regression tree on the given row indices (duplicates allowed).
RegressionTree grow_tree(const LabeledDataset& data, std::span<const std::size_t> rows,
                         const ModelConfig& config, std::uint64_t seed);
/// Per-feature row orderings (feature-major, ascending, stable), shared by
/// every tree grown on the same dataset.
std::vector<std::uint32_t> presort_features(const LabeledDataset& data);
RegressionTree grow_tree(const LabeledDataset& data, std::span<const std::uint32_t> presorted,
                         std::span<const std::size_t> rows, const ModelConfig& config, std::uint64_t seed);
/// n_trees trees; tree t is seeded with config.seed + t and, when bagging,
/// sees a bootstrap resample of n rows drawn from that seed.
std::vector<RegressionTree> grow_ensemble(const LabeledDataset& data, const ModelConfig& config);

/// Seeded disjoint halves; sizes differ by at most one.
std::pair<LabeledDataset, LabeledDataset> split_disjoint(const LabeledDataset& data, std::uint64_t seed);
/// Index form of split_disjoint (first half, second half).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, std::uint64_t seed);

enum class SplitMode { disjoint_split, shared_data };

struct ModelPair {
    FittedModel f;  // tuned
    FittedModel g;  // overfit
    SplitMode split_mode = SplitMode::disjoint_split;
};

/// True when `overfit` is strictly less regularized than `tuned`. Configs
/// from different families are not comparable and are accepted.
bool less_regularized(const ModelConfig& overfit, const ModelConfig& tuned);

/// Throws ConfigError unless less_regularized(overfit, tuned).
ModelPair fit_pair(const LabeledDataset& data, const ModelConfig& tuned, const ModelConfig& overfit,
                   SplitMode split_mode, std::uint64_t seed);

}  // namespace rome
