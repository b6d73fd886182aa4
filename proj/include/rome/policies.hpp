#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rome/models.hpp"
#include "rome/random.hpp"
#include "rome/scoring.hpp"

namespace rome {

/// Per-step eligibility. Empty means every action is eligible.
using ActionMask = std::vector<bool>;

struct Round {
    std::uint64_t step = 0;
    FeatureVector context;
    std::size_t action = 0;
    int reward = 0;
};

/// Append-only log of rounds with strictly increasing steps.
class ReplayBuffer {
public:
    void append(Round round);
    std::size_t size() const noexcept { return rounds_.size(); }
    bool empty() const noexcept { return rounds_.empty(); }
    const std::vector<Round>& rounds() const noexcept { return rounds_; }
    const Round& operator[](std::size_t i) const { return rounds_[i]; }

private:
    std::vector<Round> rounds_;
};

enum class PolicyKind { rome_ts, rome_ucb, lin_ucb, eps_greedy, bootstrap_ts, uniform };
enum class ModelScope { per_action, shared_onehot };

inline constexpr PolicyKind all_policy_kinds[] = {PolicyKind::lin_ucb,  PolicyKind::eps_greedy,
                                                  PolicyKind::bootstrap_ts, PolicyKind::rome_ucb,
                                                  PolicyKind::rome_ts,  PolicyKind::uniform};

std::string_view to_string(PolicyKind kind);
PolicyKind parse_policy_kind(std::string_view name);
std::string_view to_string(ModelScope scope);
ModelScope parse_model_scope(std::string_view name);

struct PolicyConfig {
    PolicyKind kind = PolicyKind::rome_ts;
    double alpha = 1.0;
    double epsilon = 0.1;
    double organic_rate = 0.01;
    std::size_t retrain_every = 100;
    std::size_t m_replicates = 20;
    ModelScope model_scope = ModelScope::per_action;
    ModelConfig tuned = tuned_trees();
    ModelConfig overfit = overfit_trees();
    SplitMode split_mode = SplitMode::disjoint_split;
    double lin_ucb_ridge = 1.0;
    ScoreConfig score;  // alpha is taken from PolicyConfig::alpha
    std::uint64_t seed = 0;

    void validate() const;
};

/// Common driver for all bandit policies: replay buffer, retrain cadence,
/// organic exploration and randomized argmax.
class Policy {
public:
    Policy(PolicyConfig config, std::size_t n_actions, std::size_t dim);
    virtual ~Policy() = default;
    Policy(const Policy&) = delete;
    Policy& operator=(const Policy&) = delete;

    const PolicyConfig& config() const noexcept { return config_; }
    PolicyKind kind() const noexcept { return config_.kind; }
    std::size_t n_actions() const noexcept { return n_actions_; }
    std::size_t dim() const noexcept { return dim_; }
    const ReplayBuffer& buffer() const noexcept { return buffer_; }
    std::size_t retrain_count() const noexcept { return retrain_count_; }

    /// Throws InvalidInput on an empty eligible set or context dim mismatch.
    std::size_t select_action(FeatureView context, const ActionMask& mask, Rng& rng);

    /// One score per action. Thompson kinds consume randomness from rng.
    virtual std::vector<double> score_all(FeatureView context, Rng& rng) = 0;

    /// Appends the round; retrains when the buffer length hits a multiple of
    /// retrain_every.
    void observe(Round round);

    /// Throws InvalidState on an empty buffer.
    void retrain();

protected:
    virtual bool model_based() const { return true; }
    virtual std::size_t choose(FeatureView context, const ActionMask& mask, Rng& rng);
    virtual void on_observe(const Round&) {}
    virtual void refit() {}

    void check_context(FeatureView context) const;

    PolicyConfig config_;
    std::size_t n_actions_;
    std::size_t dim_;
    ReplayBuffer buffer_;
    std::size_t retrain_count_ = 0;
};

/// Uniformly random among the eligible maximizers of scores.
std::size_t argmax_random_tie(const std::vector<double>& scores, const ActionMask& mask, Rng& rng);
std::size_t uniform_eligible(std::size_t n_actions, const ActionMask& mask, Rng& rng);

/// Reward model(s) for one kind of scoring; indexes per action or shares
/// one model over context plus a one-hot action code.
class RewardModels {
public:
    RewardModels(ModelScope scope, std::size_t n_actions, std::size_t dim)
        : scope_(scope), n_actions_(n_actions), dim_(dim) {}

    ModelScope scope() const noexcept { return scope_; }

    /// Rows of the buffer (optionally resampled) as training sets, one per
    /// action or a single shared set.
    std::vector<LabeledDataset> datasets(const ReplayBuffer& buffer, std::span<const std::size_t> rows) const;
    /// Model input for (action, context).
    FeatureView input(std::size_t action, FeatureView context, FeatureVector& scratch) const;
    /// Index of the model slot that answers for the action.
    std::size_t slot(std::size_t action) const { return scope_ == ModelScope::per_action ? action : 0; }
    std::size_t slots() const { return scope_ == ModelScope::per_action ? n_actions_ : 1; }

private:
    ModelScope scope_;
    std::size_t n_actions_;
    std::size_t dim_;
};

/// ROME-TS and ROME-UCB.
class RomePolicy final : public Policy {
public:
    static constexpr double prior_f = 0.5;
    static constexpr double prior_g = 1.0;

    RomePolicy(PolicyConfig config, std::size_t n_actions, std::size_t dim);
    std::vector<double> score_all(FeatureView context, Rng& rng) override;

    /// (f, g) predictions for an action; the cold-start prior when the slot
    /// has no fitted pair.
    std::pair<double, double> predict_pair(std::size_t action, FeatureView context) const;
    const std::optional<ModelPair>& pair(std::size_t slot) const { return pairs_[slot]; }

protected:
    void refit() override;

private:
    RewardModels models_;
    std::vector<std::optional<ModelPair>> pairs_;
    mutable FeatureVector scratch_;
};

/// Disjoint-arm LinUCB with ridge prior A = lambda I.
class LinUcbPolicy final : public Policy {
public:
    LinUcbPolicy(PolicyConfig config, std::size_t n_actions, std::size_t dim);
    std::vector<double> score_all(FeatureView context, Rng& rng) override;

    const Eigen::MatrixXd& design(std::size_t action) const { return arms_[action].A; }
    const Eigen::VectorXd& response(std::size_t action) const { return arms_[action].b; }
    Eigen::VectorXd theta(std::size_t action) const { return arms_[action].A_inv * arms_[action].b; }

protected:
    void on_observe(const Round& round) override;

private:
    struct Arm {
        Eigen::MatrixXd A;
        Eigen::MatrixXd A_inv;
        Eigen::VectorXd b;
    };
    std::vector<Arm> arms_;
};

/// Greedy on a tuned model with probability 1 - epsilon, else uniform.
class EpsGreedyPolicy final : public Policy {
public:
    EpsGreedyPolicy(PolicyConfig config, std::size_t n_actions, std::size_t dim);
    std::vector<double> score_all(FeatureView context, Rng& rng) override;

protected:
    std::size_t choose(FeatureView context, const ActionMask& mask, Rng& rng) override;
    void refit() override;

private:
    RewardModels models_;
    std::vector<std::optional<FittedModel>> fitted_;
    FeatureVector scratch_;
};

/// Bootstrap Thompson sampling over M models fitted on resampled buffers.
class BootstrapTsPolicy final : public Policy {
public:
    static constexpr double prior = 0.5;

    BootstrapTsPolicy(PolicyConfig config, std::size_t n_actions, std::size_t dim);

    /// Point predictions of the replicate picked by bootstrap_pick_model.
    std::vector<double> score_all(FeatureView context, Rng& rng) override;
    std::vector<double> score_replicate(std::size_t replicate, FeatureView context);

    std::size_t model_count() const noexcept { return replicates_.size(); }
    /// Throws InvalidState when nothing has been fitted.
    std::size_t bootstrap_pick_model(Rng& rng) const;

protected:
    void refit() override;

private:
    RewardModels models_;
    // replicates_[m][slot]
    std::vector<std::vector<std::optional<FittedModel>>> replicates_;
    FeatureVector scratch_;
};

class UniformPolicy final : public Policy {
public:
    UniformPolicy(PolicyConfig config, std::size_t n_actions, std::size_t dim);
    std::vector<double> score_all(FeatureView context, Rng& rng) override;

protected:
    bool model_based() const override { return false; }
    std::size_t choose(FeatureView context, const ActionMask& mask, Rng& rng) override;
};

std::unique_ptr<Policy> make_policy(const PolicyConfig& config, std::size_t n_actions, std::size_t dim);

}  // namespace rome
