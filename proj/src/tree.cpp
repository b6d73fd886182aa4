#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rome/error.hpp"
#include "rome/models.hpp"
#include "rome/random.hpp"

namespace rome {

double RegressionTree::predict(FeatureView x) const {
    std::int32_t i = 0;
    while (nodes_[static_cast<std::size_t>(i)].feature >= 0) {
        const TreeNode& n = nodes_[static_cast<std::size_t>(i)];
        i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes_[static_cast<std::size_t>(i)].value;
}

std::size_t RegressionTree::depth() const {
    if (nodes_.empty()) return 0;
    std::vector<std::size_t> level(nodes_.size(), 0);
    std::size_t deepest = 0;
    // Children are always appended after their parent.
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const TreeNode& n = nodes_[i];
        if (n.feature < 0) {
            deepest = std::max(deepest, level[i]);
            continue;
        }
        level[static_cast<std::size_t>(n.left)] = level[i] + 1;
        level[static_cast<std::size_t>(n.right)] = level[i] + 1;
    }
    return deepest;
}

namespace {

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = -std::numeric_limits<double>::infinity();
};

class TreeBuilder {
public:
    TreeBuilder(const LabeledDataset& data, const ModelConfig& config)
        : data_(data), config_(config), rng_(0), dim_(data.dim()) {
        const double k = std::round(config.feature_subsample * static_cast<double>(dim_));
        n_candidates_ = std::clamp<std::size_t>(static_cast<std::size_t>(k), 1, std::max<std::size_t>(dim_, 1));
        features_.resize(dim_);
        std::iota(features_.begin(), features_.end(), 0);
    }

    std::vector<TreeNode> build(std::span<const std::size_t> rows, std::span<const std::uint32_t> presorted,
                                std::uint64_t seed) {
        rng_ = SplitMixRng(derive_seed(seed, 0x74726565));
        std::iota(features_.begin(), features_.end(), 0);
        const std::size_t n = rows.size();
        const std::size_t n_data = data_.size();
        // Samples are addressed by position in `rows`; each feature keeps its
        // own ordering and every node owns the same [begin, end) slice of all
        // orderings.
        y_.resize(n);
        x_.resize(dim_ * n);
        for (std::size_t i = 0; i < n; ++i) {
            const FeatureView row = data_.row(rows[i]);
            y_[i] = data_.target(rows[i]);
            for (std::size_t f = 0; f < dim_; ++f) x_[f * n + i] = row[f];
        }
        n_ = n;

        // Bucket sample positions by dataset row, then expand each feature's
        // row ordering into a sample ordering.
        bucket_start_.assign(n_data + 1, 0);
        for (std::size_t r : rows) ++bucket_start_[r + 1];
        for (std::size_t r = 0; r < n_data; ++r) bucket_start_[r + 1] += bucket_start_[r];
        bucket_.resize(n);
        scratch_.assign(bucket_start_.begin(), bucket_start_.end() - 1);
        for (std::size_t i = 0; i < n; ++i) bucket_[scratch_[rows[i]]++] = static_cast<std::uint32_t>(i);

        order_.resize(dim_ * n);
        for (std::size_t f = 0; f < dim_; ++f) {
            std::uint32_t* out = order_.data() + f * n;
            for (std::size_t k = 0; k < n_data; ++k) {
                const std::uint32_t r = presorted[f * n_data + k];
                for (std::uint32_t j = bucket_start_[r]; j < bucket_start_[r + 1]; ++j) *out++ = bucket_[j];
            }
        }
        goes_left_.assign(n, 0);
        scratch_.resize(n);
        nodes_.clear();
        grow(0, n, 0);
        return std::move(nodes_);
    }

private:
    std::int32_t grow(std::size_t begin, std::size_t end, std::size_t depth) {
        const auto id = static_cast<std::int32_t>(nodes_.size());
        nodes_.emplace_back();

        const std::size_t n = end - begin;
        double sum = 0.0;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t i = begin; i < end; ++i) {
            const double y = y_[order_[i]];
            sum += y;
            lo = std::min(lo, y);
            hi = std::max(hi, y);
        }
        nodes_[static_cast<std::size_t>(id)].value = sum / static_cast<double>(n);

        const bool depth_reached = config_.max_depth && depth >= *config_.max_depth;
        if (depth_reached || lo == hi || n < 2 * config_.min_samples_leaf) return id;

        const Split best = find_split(begin, end, sum);
        if (best.feature < 0) return id;

        const std::size_t mid = partition(begin, end, static_cast<std::size_t>(best.feature), best.threshold);
        const std::int32_t left = grow(begin, mid, depth + 1);
        const std::int32_t right = grow(mid, end, depth + 1);
        TreeNode& node = nodes_[static_cast<std::size_t>(id)];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = left;
        node.right = right;
        return id;
    }

    // Stable partition of every feature ordering; returns the split point.
    std::size_t partition(std::size_t begin, std::size_t end, std::size_t feature, double threshold) {
        const double* xf = x_.data() + feature * n_;
        std::size_t n_left = 0;
        for (std::size_t i = begin; i < end; ++i) {
            const std::uint32_t s = order_[feature * n_ + i];
            goes_left_[s] = xf[s] <= threshold;
            n_left += goes_left_[s];
        }
        for (std::size_t f = 0; f < dim_; ++f) {
            std::uint32_t* ord = order_.data() + f * n_;
            std::size_t l = begin;
            std::size_t r = 0;
            for (std::size_t i = begin; i < end; ++i) {
                const std::uint32_t s = ord[i];
                if (goes_left_[s]) {
                    ord[l++] = s;
                } else {
                    scratch_[r++] = s;
                }
            }
            std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(r), ord + l);
        }
        return begin + n_left;
    }

    Split find_split(std::size_t begin, std::size_t end, double total) {
        Split best;
        if (n_candidates_ >= dim_) {
            for (std::size_t f = 0; f < dim_; ++f) scan_feature(f, begin, end, total, best);
            return best;
        }
        // Partial Fisher-Yates picks the candidate subset; evaluation order is
        // by ascending feature index so ties resolve the same way as without
        // subsampling.
        for (std::size_t i = 0; i < n_candidates_; ++i) {
            std::swap(features_[i], features_[i + uniform_index(rng_, dim_ - i)]);
        }
        chosen_.assign(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(n_candidates_));
        std::sort(chosen_.begin(), chosen_.end());
        for (std::size_t f : chosen_) scan_feature(f, begin, end, total, best);
        if (best.feature >= 0) return best;

        chosen_.assign(features_.begin() + static_cast<std::ptrdiff_t>(n_candidates_), features_.end());
        std::sort(chosen_.begin(), chosen_.end());
        for (std::size_t f : chosen_) scan_feature(f, begin, end, total, best);
        return best;
    }

    void scan_feature(std::size_t f, std::size_t begin, std::size_t end, double total, Split& best) const {
        const std::size_t n = end - begin;
        const std::uint32_t* ord = order_.data() + f * n_ + begin;
        const double* xf = x_.data() + f * n_;
        if (xf[ord[0]] == xf[ord[n - 1]]) return;

        const std::size_t min_leaf = config_.min_samples_leaf;
        const double base = total * total / static_cast<double>(n);
        double left_sum = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            left_sum += y_[ord[i]];
            const double x_here = xf[ord[i]];
            const double x_next = xf[ord[i + 1]];
            const std::size_t n_left = i + 1;
            if (x_here == x_next) continue;
            if (n_left < min_leaf || n - n_left < min_leaf) continue;
            const double right_sum = total - left_sum;
            const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                                right_sum * right_sum / static_cast<double>(n - n_left) - base;
            const double tol = 1e-12 * std::max(1.0, std::abs(best.gain));
            if (best.feature < 0 || gain > best.gain + tol) {
                double thr = 0.5 * (x_here + x_next);
                if (!(thr < x_next)) thr = x_here;
                best = Split{static_cast<int>(f), thr, gain};
            }
        }
    }

    const LabeledDataset& data_;
    const ModelConfig& config_;
    SplitMixRng rng_;
    std::size_t dim_;
    std::size_t n_ = 0;
    std::size_t n_candidates_ = 1;
    std::vector<std::size_t> features_;
    std::vector<std::size_t> chosen_;
    std::vector<double> x_;  // feature-major copy of the sampled rows
    std::vector<double> y_;
    std::vector<std::uint32_t> order_;
    std::vector<std::uint32_t> bucket_start_;
    std::vector<std::uint32_t> bucket_;
    std::vector<std::uint8_t> goes_left_;
    std::vector<std::uint32_t> scratch_;
    std::vector<TreeNode> nodes_;
};

}  // namespace

std::vector<std::uint32_t> presort_features(const LabeledDataset& data) {
    const std::size_t n = data.size();
    const std::size_t d = data.dim();
    std::vector<std::uint32_t> order(n * d);
    for (std::size_t f = 0; f < d; ++f) {
        const auto first = order.begin() + static_cast<std::ptrdiff_t>(f * n);
        std::iota(first, first + static_cast<std::ptrdiff_t>(n), std::uint32_t{0});
        std::stable_sort(first, first + static_cast<std::ptrdiff_t>(n),
                         [&](std::uint32_t a, std::uint32_t b) { return data.row(a)[f] < data.row(b)[f]; });
    }
    return order;
}

RegressionTree grow_tree(const LabeledDataset& data, std::span<const std::uint32_t> presorted,
                         std::span<const std::size_t> rows, const ModelConfig& config, std::uint64_t seed) {
    if (rows.empty()) throw InvalidInput("grow_tree: no rows");
    if (presorted.size() != data.size() * data.dim()) throw InvalidInput("grow_tree: presort does not match data");
    TreeBuilder builder(data, config);
    return RegressionTree(builder.build(rows, presorted, seed));
}

std::vector<RegressionTree> grow_ensemble(const LabeledDataset& data, const ModelConfig& config) {
    const std::size_t n = data.size();
    if (n == 0) throw InvalidInput("grow_ensemble: empty dataset");
    const auto presorted = presort_features(data);
    TreeBuilder builder(data, config);
    std::vector<RegressionTree> trees;
    trees.reserve(config.n_trees);
    std::vector<std::size_t> rows(n);
    for (std::size_t t = 0; t < config.n_trees; ++t) {
        const std::uint64_t tree_seed = config.seed + t;
        if (config.bagging) {
            SplitMixRng rng(tree_seed);
            for (auto& r : rows) r = uniform_index(rng, n);
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        trees.emplace_back(builder.build(rows, presorted, tree_seed));
    }
    return trees;
}

RegressionTree grow_tree(const LabeledDataset& data, std::span<const std::size_t> rows, const ModelConfig& config,
                         std::uint64_t seed) {
    return grow_tree(data, presort_features(data), rows, config, seed);
}

}  // namespace rome
