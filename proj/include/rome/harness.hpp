#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "rome/environments.hpp"
#include "rome/policies.hpp"

namespace rome {

enum class EnvironmentKind { synthetic, synthetic_depleting, covertype, chorales, movielens };

std::string_view to_string(EnvironmentKind kind);
EnvironmentKind parse_environment_kind(std::string_view name);

struct EnvironmentSpec {
    EnvironmentKind kind = EnvironmentKind::synthetic;
    std::filesystem::path path;  // dataset file for the file-backed kinds
    std::size_t row_cap = 0;     // 0: no cap
    // synthetic classification
    std::size_t n_actions = 20;
    std::size_t dim = 8;
    std::size_t n_instances = 20000;
    double separation = 1.5;
    // depleting
    std::size_t context_dim = 64;
    std::size_t passes = 10;
    std::size_t users = 200;
    std::size_t items = 200;
    std::size_t ratings_per_user = 60;
    // item split, projection and synthetic data draws
    std::uint64_t data_seed = 0;
};

/// Loads or generates the underlying data once; make() builds a fresh,
/// independently ordered environment per replication.
class EnvironmentSource {
public:
    /// Throws IoError / ParseError for file-backed kinds.
    static EnvironmentSource load(const EnvironmentSpec& spec);

    std::unique_ptr<BanditEnvironment> make(std::uint64_t seed) const;
    std::size_t n_actions() const noexcept { return n_actions_; }
    std::size_t dim() const noexcept { return dim_; }
    const EnvironmentSpec& spec() const noexcept { return spec_; }

private:
    EnvironmentSpec spec_;
    std::shared_ptr<const ClassificationData> classification_;
    std::shared_ptr<const DepletingData> depleting_;
    std::size_t n_actions_ = 0;
    std::size_t dim_ = 0;
};

struct ExperimentConfig {
    std::string dataset = "synthetic";
    EnvironmentSpec env;
    std::vector<PolicyKind> policies{std::begin(all_policy_kinds), std::end(all_policy_kinds)};
    PolicyConfig policy;  // kind and seed are filled per run
    std::size_t horizon = 5000;
    std::size_t replications = 10;
    std::uint64_t seed = 0;

    void validate() const;
};

struct LoopResult {
    std::vector<std::uint8_t> rewards;
    std::size_t forced_steps = 0;  // length of the uniform initialization phase
};

/// Phase 1 plays uniformly until every action has been observed (then
/// retrains once); phase 2 runs the policy. Stops at horizon or exhaustion.
/// Errors are rethrown with the step index prefixed.
LoopResult run_loop(BanditEnvironment& env, Policy& policy, std::size_t horizon, Rng& rng);

struct ReplicationSeeds {
    std::uint64_t environment;
    std::uint64_t policy;
};

/// Environment order depends on (base, replication) only, so every policy
/// sees the same instance order within a replication.
ReplicationSeeds replication_seeds(std::uint64_t base_seed, std::size_t replication, PolicyKind kind);

struct ReplicationResult {
    PolicyKind kind = PolicyKind::uniform;
    std::size_t replication = 0;
    std::uint64_t seed = 0;  // policy seed
    std::vector<std::uint8_t> rewards;
    std::size_t forced_steps = 0;
};

ReplicationResult run_replication(const EnvironmentSource& source, const ExperimentConfig& config, PolicyKind kind,
                                  std::size_t replication);

/// 1 - mean(rewards). Throws InvalidInput on an empty series.
double average_regret(std::span<const std::uint8_t> rewards);

struct RegretSummary {
    std::string policy;
    std::vector<double> regrets;  // per replication
    double mean = 0.0;
    double ci95_halfwidth = 0.0;
    bool ci_defined = false;                     // false with a single replication
    std::vector<double> mean_cumulative_reward;  // per step, averaged over replications
};

/// Two-sided 97.5% Student-t quantile.
double t_quantile_975(std::size_t dof);

RegretSummary summarize(std::string policy, std::vector<double> regrets);

struct ExperimentResult {
    std::vector<ReplicationResult> runs;  // policy-major, replication-minor
    std::vector<RegretSummary> summaries;
};

/// Runs every (policy, replication) pair across `jobs` worker threads.
ExperimentResult run_experiment(const ExperimentConfig& config, const EnvironmentSource& source, std::size_t jobs = 1);

/// Writes summary.csv, config.txt and series/<policy>_rep<r>_seed<seed>.csv
/// under dir. Throws IoError naming the path on failure.
void persist_results(const ExperimentResult& result, const ExperimentConfig& config, const std::filesystem::path& dir);

inline constexpr const char* summary_header = "policy,dataset,n_replications,mean_regret,ci95_halfwidth";
inline constexpr const char* series_header = "step,reward,cumulative_reward";

std::string summary_csv(const ExperimentResult& result, const ExperimentConfig& config);
std::string series_filename(const ReplicationResult& run);

}  // namespace rome
