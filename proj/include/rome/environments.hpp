#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rome/models.hpp"
#include "rome/policies.hpp"

namespace rome {

struct Step {
    FeatureVector context;
    ActionMask eligible;  // empty: all actions eligible
};

/// A stream of contexts plus a hidden reward oracle answering one action
/// per step.
class BanditEnvironment {
public:
    virtual ~BanditEnvironment() = default;
    virtual std::size_t n_actions() const = 0;
    virtual std::size_t dim() const = 0;
    /// nullopt once the stream is exhausted.
    virtual std::optional<Step> next_step() = 0;
    /// Throws ProtocolError without a pending step or on a second call.
    virtual int reward(std::size_t action) = 0;
};

/// Labeled instances for a classification-derived bandit.
struct ClassificationData {
    std::size_t dim = 0;
    std::size_t n_classes = 0;
    std::vector<double> features;  // row-major
    std::vector<std::size_t> labels;

    std::size_t size() const noexcept { return labels.size(); }
    FeatureView row(std::size_t i) const { return {features.data() + i * dim, dim}; }
    void add(FeatureView x, std::size_t label);
};

/// Reward 1 iff the chosen action is the instance's class. Instances are
/// visited in a seeded permutation, truncated to row_cap when non-zero.
class ClassificationEnv final : public BanditEnvironment {
public:
    ClassificationEnv(std::shared_ptr<const ClassificationData> data, std::uint64_t seed, std::size_t row_cap = 0,
                      std::size_t passes = 1);

    std::size_t n_actions() const override { return data_->n_classes; }
    std::size_t dim() const override { return data_->dim; }
    std::optional<Step> next_step() override;
    int reward(std::size_t action) override;

    std::size_t steps_per_pass() const noexcept { return order_.size(); }
    const std::vector<std::size_t>& order() const noexcept { return order_; }
    /// Label of the pending instance (test oracles only).
    std::size_t pending_label() const;

private:
    std::shared_ptr<const ClassificationData> data_;
    std::vector<std::size_t> order_;
    std::size_t passes_;
    std::size_t cursor_ = 0;
    std::optional<std::size_t> pending_;
};

struct Interaction {
    std::int64_t user = 0;
    std::int64_t item = 0;
    double rating = 0.0;
};

/// User contexts, cold-start item actions and positive (user, cold item)
/// pairs derived from an interaction table.
struct DepletingData {
    std::size_t context_dim = 0;
    std::vector<std::int64_t> user_ids;
    std::vector<std::int64_t> existing_items;
    std::vector<std::int64_t> cold_items;           // action index -> item id
    std::vector<double> user_contexts;              // users x context_dim
    std::vector<std::vector<std::size_t>> positives;  // per user, sorted cold action indices

    std::size_t n_users() const noexcept { return user_ids.size(); }
    FeatureView context(std::size_t user) const {
        return {user_contexts.data() + user * context_dim, context_dim};
    }
    bool is_positive(std::size_t user, std::size_t action) const;
};

inline constexpr double positive_rating_threshold = 4.0;

/// Splits items 50/50 by seed into existing and cold halves and projects
/// each user's existing-item positives to context_dim with a seeded sparse
/// random projection.
DepletingData build_depleting_data(const std::vector<Interaction>& interactions, std::uint64_t seed,
                                   std::size_t context_dim = 64);

/// Users arrive once per pass in a fresh seeded order; a positive
/// (user, cold item) pair pays 1 the first time only.
class DepletingEnv final : public BanditEnvironment {
public:
    struct LedgerEntry {
        std::size_t user;
        std::size_t action;
        int reward;
    };

    DepletingEnv(std::shared_ptr<const DepletingData> data, std::uint64_t seed, std::size_t passes = 10);

    std::size_t n_actions() const override { return data_->cold_items.size(); }
    std::size_t dim() const override { return data_->context_dim; }
    std::optional<Step> next_step() override;
    int reward(std::size_t action) override;

    std::size_t steps_per_pass() const noexcept { return data_->n_users(); }
    std::size_t passes() const noexcept { return passes_; }
    const std::vector<LedgerEntry>& ledger() const noexcept { return ledger_; }
    bool depleted(std::size_t user, std::size_t action) const { return depleted_.count({user, action}) > 0; }
    std::size_t pending_user() const;

private:
    std::shared_ptr<const DepletingData> data_;
    std::uint64_t seed_;
    std::size_t passes_;
    std::size_t cursor_ = 0;
    std::vector<std::size_t> order_;
    std::optional<std::size_t> pending_;
    std::set<std::pair<std::size_t, std::size_t>> depleted_;
    std::vector<LedgerEntry> ledger_;
};

// Loaders. Each throws IoError when the file cannot be opened and
// ParseError (with line number) on malformed rows.

/// Headerless CSV: 54 numeric columns and a class in 1..7.
std::shared_ptr<ClassificationData> load_covertype(const std::filesystem::path& path);

/// Non-numeric feature columns become one-hot blocks. Categories not seen
/// when the encoder was built encode to an all-zero block.
class CategoricalEncoder {
public:
    /// rows: feature columns only (label excluded).
    static CategoricalEncoder fit(const std::vector<std::vector<std::string>>& rows);

    std::size_t width() const noexcept { return width_; }
    FeatureVector transform(const std::vector<std::string>& row) const;

private:
    struct Column {
        bool numeric = true;
        std::vector<std::string> categories;  // sorted
        std::size_t offset = 0;
    };
    std::vector<Column> columns_;
    std::size_t width_ = 0;
};

/// CSV with categorical string columns; class label in the last column.
/// Labels are indexed in sorted order over the whole file.
std::shared_ptr<ClassificationData> load_chorales(const std::filesystem::path& path);

/// Header CSV userId,movieId,rating,timestamp.
std::vector<Interaction> load_movielens(const std::filesystem::path& path);
std::shared_ptr<DepletingData> load_movielens_depleting(const std::filesystem::path& path, std::uint64_t seed,
                                                        std::size_t context_dim = 64);

// Synthetic generators.

/// K Gaussian clusters: centers ~ N(0, separation^2 I), x = center + N(0, I),
/// label = cluster index (uniform).
std::shared_ptr<ClassificationData> gen_synthetic_bandit(std::size_t n_actions, std::size_t dim, std::size_t n,
                                                         std::uint64_t seed, double separation = 1.5);

/// MovieLens-style interactions: users and items fall into taste groups and
/// rate same-group items highly.
std::vector<Interaction> gen_synthetic_interactions(std::size_t n_users, std::size_t n_items,
                                                    std::size_t ratings_per_user, std::uint64_t seed,
                                                    std::size_t n_groups = 5);

enum class TrueFunction { sin3x, linear, constant };

/// One-dimensional regression toy y = h(x) + eps.
struct SyntheticSpec {
    TrueFunction h = TrueFunction::sin3x;
    double intercept = 0.0;  // linear: h = intercept + slope x; constant: h = intercept
    double slope = 1.0;
    std::vector<double> sites;      // explicit design (with n_per_site each) ...
    std::size_t n_per_site = 1;
    double sampler_lo = -1.0;       // ... or n_samples uniform draws when sites is empty
    double sampler_hi = 1.0;
    std::size_t n_samples = 0;
    double sigma = 0.25;
    std::vector<double> sigma_per_site;  // heteroskedastic noise, overrides sigma

    double truth(double x) const;
    void validate() const;
};

/// 20 uniform draws on [-1, 1].
SyntheticSpec toy_spec_scatter();
/// 100 draws at each of {-1, -1/2, 0, 1/2, 1}.
SyntheticSpec toy_spec_clustered();
/// h(x) = 2 + x on an even grid of n points over [-1, 1], sigma = 1.
SyntheticSpec linear_gaussian_spec(std::size_t n = 200);

LabeledDataset gen_toy(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace rome
