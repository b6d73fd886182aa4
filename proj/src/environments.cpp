#include "rome/environments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "rome/error.hpp"
#include "rome/random.hpp"

namespace rome {

void ClassificationData::add(FeatureView x, std::size_t label) {
    if (labels.empty() && dim == 0) dim = x.size();
    if (x.size() != dim) throw InvalidInput("instance dimension does not match dataset dimension");
    features.insert(features.end(), x.begin(), x.end());
    labels.push_back(label);
    n_classes = std::max(n_classes, label + 1);
}

ClassificationEnv::ClassificationEnv(std::shared_ptr<const ClassificationData> data, std::uint64_t seed,
                                     std::size_t row_cap, std::size_t passes)
    : data_(std::move(data)), passes_(passes) {
    if (!data_ || data_->size() == 0) throw InvalidInput("classification environment needs instances");
    if (data_->n_classes < 2) throw InvalidInput("classification environment needs at least 2 classes");
    order_.resize(data_->size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(order_.begin(), order_.end(), rng);
    if (row_cap > 0 && row_cap < order_.size()) order_.resize(row_cap);
}

std::optional<Step> ClassificationEnv::next_step() {
    if (cursor_ >= order_.size() * passes_) return std::nullopt;
    const std::size_t instance = order_[cursor_ % order_.size()];
    ++cursor_;
    pending_ = instance;
    const FeatureView x = data_->row(instance);
    return Step{FeatureVector(x.begin(), x.end()), {}};
}

int ClassificationEnv::reward(std::size_t action) {
    if (!pending_) throw ProtocolError("reward requested without a pending step");
    if (action >= n_actions()) throw InvalidInput("action index out of range");
    const std::size_t label = data_->labels[*pending_];
    pending_.reset();
    return action == label ? 1 : 0;
}

std::size_t ClassificationEnv::pending_label() const {
    if (!pending_) throw ProtocolError("no pending step");
    return data_->labels[*pending_];
}

bool DepletingData::is_positive(std::size_t user, std::size_t action) const {
    const auto& p = positives[user];
    return std::binary_search(p.begin(), p.end(), action);
}

DepletingData build_depleting_data(const std::vector<Interaction>& interactions, std::uint64_t seed,
                                   std::size_t context_dim) {
    if (interactions.empty()) throw InvalidInput("no interactions");
    if (context_dim == 0) throw InvalidInput("context_dim must be positive");

    DepletingData out;
    out.context_dim = context_dim;

    std::vector<std::int64_t> items;
    for (const auto& r : interactions) {
        out.user_ids.push_back(r.user);
        items.push_back(r.item);
    }
    std::sort(out.user_ids.begin(), out.user_ids.end());
    out.user_ids.erase(std::unique(out.user_ids.begin(), out.user_ids.end()), out.user_ids.end());
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    if (items.size() < 4) throw InvalidInput("need at least 4 distinct items to form a cold-start half");

    Rng rng(derive_seed(seed, 0));
    std::shuffle(items.begin(), items.end(), rng);
    const std::size_t n_existing = items.size() / 2;
    out.existing_items.assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_existing));
    out.cold_items.assign(items.begin() + static_cast<std::ptrdiff_t>(n_existing), items.end());
    std::sort(out.existing_items.begin(), out.existing_items.end());
    std::sort(out.cold_items.begin(), out.cold_items.end());

    auto index_of = [](const std::vector<std::int64_t>& sorted, std::int64_t id) -> std::optional<std::size_t> {
        const auto it = std::lower_bound(sorted.begin(), sorted.end(), id);
        if (it == sorted.end() || *it != id) return std::nullopt;
        return static_cast<std::size_t>(it - sorted.begin());
    };

    // Achlioptas projection: +-sqrt(3 / k) with probability 1/6 each, else 0.
    const double scale = std::sqrt(3.0 / static_cast<double>(context_dim));
    std::vector<double> projection(out.existing_items.size() * context_dim, 0.0);
    Rng proj_rng(derive_seed(seed, 1));
    for (double& v : projection) {
        const std::size_t u = uniform_index(proj_rng, 6);
        v = u == 0 ? scale : (u == 1 ? -scale : 0.0);
    }

    const std::size_t n_users = out.user_ids.size();
    out.user_contexts.assign(n_users * context_dim, 0.0);
    out.positives.assign(n_users, {});
    std::vector<std::vector<std::size_t>> existing_pos(n_users);
    for (const auto& r : interactions) {
        if (r.rating < positive_rating_threshold) continue;
        const std::size_t u = *index_of(out.user_ids, r.user);
        if (auto c = index_of(out.cold_items, r.item)) {
            out.positives[u].push_back(*c);
        } else if (auto e = index_of(out.existing_items, r.item)) {
            existing_pos[u].push_back(*e);
        }
    }
    for (std::size_t u = 0; u < n_users; ++u) {
        auto& p = out.positives[u];
        std::sort(p.begin(), p.end());
        p.erase(std::unique(p.begin(), p.end()), p.end());
        auto& e = existing_pos[u];
        std::sort(e.begin(), e.end());
        e.erase(std::unique(e.begin(), e.end()), e.end());
        double* ctx = out.user_contexts.data() + u * context_dim;
        for (std::size_t item : e) {
            const double* row = projection.data() + item * context_dim;
            for (std::size_t k = 0; k < context_dim; ++k) ctx[k] += row[k];
        }
    }
    return out;
}

DepletingEnv::DepletingEnv(std::shared_ptr<const DepletingData> data, std::uint64_t seed, std::size_t passes)
    : data_(std::move(data)), seed_(seed), passes_(passes) {
    if (!data_ || data_->n_users() == 0) throw InvalidInput("depleting environment needs users");
    if (data_->cold_items.size() < 2) throw InvalidInput("depleting environment needs at least 2 cold items");
    order_.resize(data_->n_users());
}

std::optional<Step> DepletingEnv::next_step() {
    const std::size_t n = data_->n_users();
    if (cursor_ >= n * passes_) return std::nullopt;
    if (cursor_ % n == 0) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        Rng rng(derive_seed(seed_, cursor_ / n));
        std::shuffle(order_.begin(), order_.end(), rng);
    }
    const std::size_t user = order_[cursor_ % n];
    ++cursor_;
    pending_ = user;
    const FeatureView x = data_->context(user);
    return Step{FeatureVector(x.begin(), x.end()), {}};
}

int DepletingEnv::reward(std::size_t action) {
    if (!pending_) throw ProtocolError("reward requested without a pending step");
    if (action >= n_actions()) throw InvalidInput("action index out of range");
    const std::size_t user = *pending_;
    pending_.reset();
    int r = 0;
    if (data_->is_positive(user, action) && depleted_.emplace(user, action).second) r = 1;
    ledger_.push_back({user, action, r});
    return r;
}

std::size_t DepletingEnv::pending_user() const {
    if (!pending_) throw ProtocolError("no pending step");
    return *pending_;
}

std::shared_ptr<ClassificationData> gen_synthetic_bandit(std::size_t n_actions, std::size_t dim, std::size_t n,
                                                         std::uint64_t seed, double separation) {
    if (n_actions < 2) throw InvalidInput("synthetic bandit needs K >= 2");
    if (dim == 0 || n == 0) throw InvalidInput("synthetic bandit needs dim > 0 and n > 0");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> centers(n_actions * dim);
    for (double& c : centers) c = separation * normal(rng);

    auto data = std::make_shared<ClassificationData>();
    data->dim = dim;
    data->n_classes = n_actions;
    data->features.reserve(n * dim);
    data->labels.reserve(n);
    FeatureVector x(dim);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = uniform_index(rng, n_actions);
        for (std::size_t j = 0; j < dim; ++j) x[j] = centers[label * dim + j] + normal(rng);
        data->add(x, label);
    }
    data->n_classes = n_actions;
    return data;
}

std::vector<Interaction> gen_synthetic_interactions(std::size_t n_users, std::size_t n_items,
                                                    std::size_t ratings_per_user, std::uint64_t seed,
                                                    std::size_t n_groups) {
    if (n_users == 0 || n_items < 4 || n_groups == 0) throw InvalidInput("invalid synthetic interaction shape");
    Rng rng(seed);
    std::vector<std::size_t> item_group(n_items);
    for (auto& g : item_group) g = uniform_index(rng, n_groups);

    std::vector<Interaction> out;
    out.reserve(n_users * ratings_per_user);
    std::vector<std::size_t> items(n_items);
    for (std::size_t u = 0; u < n_users; ++u) {
        const std::size_t group = uniform_index(rng, n_groups);
        std::iota(items.begin(), items.end(), std::size_t{0});
        std::shuffle(items.begin(), items.end(), rng);
        const std::size_t m = std::min(ratings_per_user, n_items);
        for (std::size_t k = 0; k < m; ++k) {
            const std::size_t item = items[k];
            const double p_like = item_group[item] == group ? 0.8 : 0.05;
            const double rating = uniform01(rng) < p_like ? 5.0 : 2.0;
            out.push_back({static_cast<std::int64_t>(u + 1), static_cast<std::int64_t>(item + 1), rating});
        }
    }
    return out;
}

double SyntheticSpec::truth(double x) const {
    switch (h) {
        case TrueFunction::sin3x: return std::sin(3.0 * x);
        case TrueFunction::linear: return intercept + slope * x;
        case TrueFunction::constant: return intercept;
    }
    return 0.0;
}

void SyntheticSpec::validate() const {
    if (sites.empty() && n_samples == 0) throw InvalidInput("synthetic spec has an empty design");
    if (!sites.empty() && n_per_site == 0) throw InvalidInput("n_per_site must be positive");
    if (!(sigma >= 0.0)) throw InvalidInput("sigma must be >= 0");
    if (!sigma_per_site.empty()) {
        if (sigma_per_site.size() != sites.size()) throw InvalidInput("sigma_per_site needs one value per site");
        for (double s : sigma_per_site) {
            if (!(s >= 0.0)) throw InvalidInput("sigma must be >= 0");
        }
    }
}

SyntheticSpec toy_spec_scatter() {
    SyntheticSpec s;
    s.n_samples = 20;
    return s;
}

SyntheticSpec toy_spec_clustered() {
    SyntheticSpec s;
    s.sites = {-1.0, -0.5, 0.0, 0.5, 1.0};
    s.n_per_site = 100;
    return s;
}

SyntheticSpec linear_gaussian_spec(std::size_t n) {
    SyntheticSpec s;
    s.h = TrueFunction::linear;
    s.intercept = 2.0;
    s.slope = 1.0;
    s.sigma = 1.0;
    s.n_per_site = 1;
    s.sites.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        s.sites[i] = n == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return s;
}

LabeledDataset gen_toy(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    LabeledDataset out(1);
    double x[1];
    if (!spec.sites.empty()) {
        out.reserve(spec.sites.size() * spec.n_per_site);
        for (std::size_t s = 0; s < spec.sites.size(); ++s) {
            const double sigma = spec.sigma_per_site.empty() ? spec.sigma : spec.sigma_per_site[s];
            for (std::size_t k = 0; k < spec.n_per_site; ++k) {
                x[0] = spec.sites[s];
                out.add(x, spec.truth(x[0]) + sigma * normal(rng));
            }
        }
        return out;
    }
    out.reserve(spec.n_samples);
    std::uniform_real_distribution<double> design(spec.sampler_lo, spec.sampler_hi);
    for (std::size_t i = 0; i < spec.n_samples; ++i) {
        x[0] = design(rng);
        out.add(x, spec.truth(x[0]) + spec.sigma * normal(rng));
    }
    return out;
}

}  // namespace rome
