#include "rome/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rome/error.hpp"

namespace rome {

void ReplayBuffer::append(Round round) {
    if (!rounds_.empty() && round.step <= rounds_.back().step) {
        throw InvalidInput("replay buffer steps must be strictly increasing");
    }
    rounds_.push_back(std::move(round));
}

std::string_view to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::rome_ts: return "rome_ts";
        case PolicyKind::rome_ucb: return "rome_ucb";
        case PolicyKind::lin_ucb: return "lin_ucb";
        case PolicyKind::eps_greedy: return "eps_greedy";
        case PolicyKind::bootstrap_ts: return "bootstrap_ts";
        case PolicyKind::uniform: return "uniform";
    }
    return "unknown";
}

PolicyKind parse_policy_kind(std::string_view name) {
    for (PolicyKind k : all_policy_kinds) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("unknown policy kind '" + std::string(name) + "'");
}

std::string_view to_string(ModelScope scope) {
    return scope == ModelScope::per_action ? "per_action" : "shared_onehot";
}

ModelScope parse_model_scope(std::string_view name) {
    if (name == "per_action") return ModelScope::per_action;
    if (name == "shared_onehot") return ModelScope::shared_onehot;
    throw ConfigError("unknown model scope '" + std::string(name) + "'");
}

void PolicyConfig::validate() const {
    if (!std::isfinite(alpha) || alpha < 0.0) throw ConfigError("alpha must be >= 0");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
    if (!(organic_rate >= 0.0 && organic_rate <= 1.0)) throw ConfigError("organic_rate must lie in [0, 1]");
    if (retrain_every < 1) throw ConfigError("retrain_every must be >= 1");
    if (m_replicates < 1) throw ConfigError("m_replicates must be >= 1");
    if (!(lin_ucb_ridge > 0.0)) throw ConfigError("lin_ucb_ridge must be positive");
    tuned.validate();
    overfit.validate();
    score.validate();
    if (kind == PolicyKind::rome_ts || kind == PolicyKind::rome_ucb) {
        if (!less_regularized(overfit, tuned)) {
            throw ConfigError("overfit model config must be strictly less regularized than the tuned config");
        }
    }
}

std::size_t uniform_eligible(std::size_t n_actions, const ActionMask& mask, Rng& rng) {
    if (mask.empty()) return uniform_index(rng, n_actions);
    const auto count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
    if (count == 0) throw InvalidInput("no eligible actions");
    std::size_t pick = uniform_index(rng, count);
    for (std::size_t a = 0; a < mask.size(); ++a) {
        if (mask[a] && pick-- == 0) return a;
    }
    return mask.size() - 1;  // unreachable
}

std::size_t argmax_random_tie(const std::vector<double>& scores, const ActionMask& mask, Rng& rng) {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> tied;
    for (std::size_t a = 0; a < scores.size(); ++a) {
        if (!mask.empty() && !mask[a]) continue;
        if (scores[a] > best) {
            best = scores[a];
            tied.assign(1, a);
        } else if (scores[a] == best) {
            tied.push_back(a);
        }
    }
    if (tied.empty()) throw InvalidInput("no eligible actions");
    return tied.size() == 1 ? tied.front() : tied[uniform_index(rng, tied.size())];
}

Policy::Policy(PolicyConfig config, std::size_t n_actions, std::size_t dim)
    : config_(std::move(config)), n_actions_(n_actions), dim_(dim) {
    if (n_actions_ < 2) throw InvalidInput("a bandit needs at least 2 actions");
    config_.score.alpha = config_.alpha;
    config_.validate();
}

void Policy::check_context(FeatureView context) const {
    if (context.size() != dim_) {
        throw InvalidInput("context dimension " + std::to_string(context.size()) + ", policy expects " +
                           std::to_string(dim_));
    }
}

std::size_t Policy::select_action(FeatureView context, const ActionMask& mask, Rng& rng) {
    check_context(context);
    if (!mask.empty()) {
        if (mask.size() != n_actions_) throw InvalidInput("action mask size does not match the action count");
        if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
            throw InvalidInput("no eligible actions");
        }
    }
    if (model_based() && uniform01(rng) < config_.organic_rate) return uniform_eligible(n_actions_, mask, rng);
    return choose(context, mask, rng);
}

std::size_t Policy::choose(FeatureView context, const ActionMask& mask, Rng& rng) {
    return argmax_random_tie(score_all(context, rng), mask, rng);
}

void Policy::observe(Round round) {
    check_context(round.context);
    if (round.action >= n_actions_) throw InvalidInput("action index out of range");
    if (round.reward != 0 && round.reward != 1) throw InvalidInput("reward must be 0 or 1");
    buffer_.append(std::move(round));
    on_observe(buffer_.rounds().back());
    if (buffer_.size() % config_.retrain_every == 0) retrain();
}

void Policy::retrain() {
    if (buffer_.empty()) throw InvalidState("cannot retrain on an empty replay buffer");
    refit();
    ++retrain_count_;
}

std::vector<LabeledDataset> RewardModels::datasets(const ReplayBuffer& buffer,
                                                   std::span<const std::size_t> rows) const {
    if (scope_ == ModelScope::per_action) {
        std::vector<LabeledDataset> out(n_actions_, LabeledDataset(dim_));
        for (std::size_t r : rows) {
            const Round& round = buffer[r];
            out[round.action].add(round.context, static_cast<double>(round.reward));
        }
        return out;
    }
    std::vector<LabeledDataset> out(1, LabeledDataset(dim_ + n_actions_));
    out[0].reserve(rows.size());
    FeatureVector scratch;
    for (std::size_t r : rows) {
        const Round& round = buffer[r];
        out[0].add(input(round.action, round.context, scratch), static_cast<double>(round.reward));
    }
    return out;
}

FeatureView RewardModels::input(std::size_t action, FeatureView context, FeatureVector& scratch) const {
    if (scope_ == ModelScope::per_action) return context;
    scratch.assign(dim_ + n_actions_, 0.0);
    std::copy(context.begin(), context.end(), scratch.begin());
    scratch[dim_ + action] = 1.0;
    return scratch;
}

namespace {

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    return rows;
}

}  // namespace

RomePolicy::RomePolicy(PolicyConfig config, std::size_t n_actions, std::size_t dim)
    : Policy(std::move(config), n_actions, dim), models_(config_.model_scope, n_actions, dim) {
    if (kind() != PolicyKind::rome_ts && kind() != PolicyKind::rome_ucb) {
        throw ConfigError("RomePolicy needs kind rome_ts or rome_ucb");
    }
    pairs_.resize(models_.slots());
}

void RomePolicy::refit() {
    const auto rows = all_rows(buffer_.size());
    auto sets = models_.datasets(buffer_, rows);
    const std::size_t min_rows = config_.split_mode == SplitMode::disjoint_split ? 2 : 1;
    for (std::size_t s = 0; s < sets.size(); ++s) {
        if (sets[s].size() < min_rows) {
            pairs_[s].reset();
            continue;
        }
        pairs_[s] = fit_pair(sets[s], config_.tuned, config_.overfit, config_.split_mode,
                             derive_seed(config_.seed, retrain_count_, s));
    }
}

std::pair<double, double> RomePolicy::predict_pair(std::size_t action, FeatureView context) const {
    const auto& p = pairs_[models_.slot(action)];
    if (!p) return {prior_f, prior_g};
    const FeatureView in = models_.input(action, context, scratch_);
    return {p->f.predict(in), p->g.predict(in)};
}

std::vector<double> RomePolicy::score_all(FeatureView context, Rng& rng) {
    check_context(context);
    std::vector<double> scores(n_actions_);
    for (std::size_t a = 0; a < n_actions_; ++a) {
        const auto [f, g] = predict_pair(a, context);
        scores[a] = kind() == PolicyKind::rome_ts ? ts_score(f, g, config_.score, rng)
                                                  : beta_ucb(beta_moment_match(f, g, config_.score), config_.alpha);
    }
    return scores;
}

LinUcbPolicy::LinUcbPolicy(PolicyConfig config, std::size_t n_actions, std::size_t dim)
    : Policy(std::move(config), n_actions, dim) {
    const auto d = static_cast<Eigen::Index>(dim);
    Arm prior{Eigen::MatrixXd::Identity(d, d) * config_.lin_ucb_ridge,
              Eigen::MatrixXd::Identity(d, d) / config_.lin_ucb_ridge, Eigen::VectorXd::Zero(d)};
    arms_.assign(n_actions, prior);
}

void LinUcbPolicy::on_observe(const Round& round) {
    Arm& arm = arms_[round.action];
    const Eigen::Map<const Eigen::VectorXd> x(round.context.data(), static_cast<Eigen::Index>(round.context.size()));
    arm.A.noalias() += x * x.transpose();
    arm.b += static_cast<double>(round.reward) * x;
    // Sherman-Morrison rank-one update of the inverse.
    const Eigen::VectorXd Ax = arm.A_inv * x;
    arm.A_inv.noalias() -= (Ax * Ax.transpose()) / (1.0 + x.dot(Ax));
}

std::vector<double> LinUcbPolicy::score_all(FeatureView context, Rng&) {
    check_context(context);
    const Eigen::Map<const Eigen::VectorXd> x(context.data(), static_cast<Eigen::Index>(context.size()));
    std::vector<double> scores(n_actions_);
    for (std::size_t a = 0; a < n_actions_; ++a) {
        const Arm& arm = arms_[a];
        const Eigen::VectorXd Ax = arm.A_inv * x;
        const double mean = Ax.dot(arm.b);  // theta . x with symmetric A_inv
        scores[a] = mean + config_.alpha * std::sqrt(std::max(x.dot(Ax), 0.0));
    }
    return scores;
}

EpsGreedyPolicy::EpsGreedyPolicy(PolicyConfig config, std::size_t n_actions, std::size_t dim)
    : Policy(std::move(config), n_actions, dim), models_(config_.model_scope, n_actions, dim) {
    fitted_.resize(models_.slots());
}

void EpsGreedyPolicy::refit() {
    const auto rows = all_rows(buffer_.size());
    auto sets = models_.datasets(buffer_, rows);
    for (std::size_t s = 0; s < sets.size(); ++s) {
        if (sets[s].empty()) {
            fitted_[s].reset();
            continue;
        }
        ModelConfig cfg = config_.tuned;
        cfg.seed = derive_seed(config_.seed, retrain_count_, s);
        fitted_[s] = fit(sets[s], cfg);
    }
}

std::vector<double> EpsGreedyPolicy::score_all(FeatureView context, Rng&) {
    check_context(context);
    std::vector<double> scores(n_actions_, 0.5);
    for (std::size_t a = 0; a < n_actions_; ++a) {
        const auto& m = fitted_[models_.slot(a)];
        if (m) scores[a] = m->predict(models_.input(a, context, scratch_));
    }
    return scores;
}

std::size_t EpsGreedyPolicy::choose(FeatureView context, const ActionMask& mask, Rng& rng) {
    if (uniform01(rng) < config_.epsilon) return uniform_eligible(n_actions_, mask, rng);
    return argmax_random_tie(score_all(context, rng), mask, rng);
}

BootstrapTsPolicy::BootstrapTsPolicy(PolicyConfig config, std::size_t n_actions, std::size_t dim)
    : Policy(std::move(config), n_actions, dim), models_(config_.model_scope, n_actions, dim) {}

void BootstrapTsPolicy::refit() {
    const std::size_t n = buffer_.size();
    replicates_.assign(config_.m_replicates, std::vector<std::optional<FittedModel>>(models_.slots()));
    std::vector<std::size_t> rows(n);
    for (std::size_t m = 0; m < config_.m_replicates; ++m) {
        Rng rng(derive_seed(config_.seed, retrain_count_, m, 0));
        for (auto& r : rows) r = uniform_index(rng, n);
        auto sets = models_.datasets(buffer_, rows);
        for (std::size_t s = 0; s < sets.size(); ++s) {
            if (sets[s].empty()) continue;
            ModelConfig cfg = config_.tuned;
            cfg.seed = derive_seed(config_.seed, retrain_count_, m, s + 1);
            replicates_[m][s] = fit(sets[s], cfg);
        }
    }
}

std::size_t BootstrapTsPolicy::bootstrap_pick_model(Rng& rng) const {
    if (replicates_.empty()) throw InvalidState("bootstrap policy has no fitted models");
    return uniform_index(rng, replicates_.size());
}

std::vector<double> BootstrapTsPolicy::score_replicate(std::size_t replicate, FeatureView context) {
    check_context(context);
    std::vector<double> scores(n_actions_, prior);
    const auto& models = replicates_.at(replicate);
    for (std::size_t a = 0; a < n_actions_; ++a) {
        const auto& m = models[models_.slot(a)];
        if (m) scores[a] = m->predict(models_.input(a, context, scratch_));
    }
    return scores;
}

std::vector<double> BootstrapTsPolicy::score_all(FeatureView context, Rng& rng) {
    check_context(context);
    if (replicates_.empty()) return std::vector<double>(n_actions_, prior);
    return score_replicate(bootstrap_pick_model(rng), context);
}

UniformPolicy::UniformPolicy(PolicyConfig config, std::size_t n_actions, std::size_t dim)
    : Policy(std::move(config), n_actions, dim) {}

std::vector<double> UniformPolicy::score_all(FeatureView context, Rng&) {
    check_context(context);
    return std::vector<double>(n_actions_, 0.0);
}

std::size_t UniformPolicy::choose(FeatureView, const ActionMask& mask, Rng& rng) {
    return uniform_eligible(n_actions_, mask, rng);
}

std::unique_ptr<Policy> make_policy(const PolicyConfig& config, std::size_t n_actions, std::size_t dim) {
    switch (config.kind) {
        case PolicyKind::rome_ts:
        case PolicyKind::rome_ucb: return std::make_unique<RomePolicy>(config, n_actions, dim);
        case PolicyKind::lin_ucb: return std::make_unique<LinUcbPolicy>(config, n_actions, dim);
        case PolicyKind::eps_greedy: return std::make_unique<EpsGreedyPolicy>(config, n_actions, dim);
        case PolicyKind::bootstrap_ts: return std::make_unique<BootstrapTsPolicy>(config, n_actions, dim);
        case PolicyKind::uniform: return std::make_unique<UniformPolicy>(config, n_actions, dim);
    }
    throw ConfigError("unknown policy kind");
}

}  // namespace rome
