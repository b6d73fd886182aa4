#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "rome/environments.hpp"
#include "rome/error.hpp"
#include "rome/harness.hpp"
#include "rome/policies.hpp"

using namespace rome;

namespace {

PolicyConfig config_for(PolicyKind kind, std::uint64_t seed = 1) {
    PolicyConfig c;
    c.kind = kind;
    c.seed = seed;
    return c;
}

std::vector<double> frequencies(Policy& p, std::size_t k, FeatureView x, std::size_t n, std::uint64_t seed,
                                const ActionMask& mask = {}) {
    Rng rng(seed);
    std::vector<double> freq(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) freq[p.select_action(x, mask, rng)] += 1.0;
    for (double& f : freq) f /= static_cast<double>(n);
    return freq;
}

// Action 0 always pays, every other action never does.
void feed_dominant_arm(Policy& p, std::size_t k, std::size_t rounds, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    for (std::size_t t = 0; t < rounds; ++t) {
        const std::size_t a = t % k;
        p.observe(Round{t, {z(rng), z(rng)}, a, a == 0 ? 1 : 0});
    }
}

std::vector<std::size_t> action_trace(PolicyKind kind, std::uint64_t seed) {
    const auto data = gen_synthetic_bandit(4, 3, 600, 7);
    ClassificationEnv env(data, 3);
    PolicyConfig c = config_for(kind, seed);
    c.m_replicates = 3;
    auto policy = make_policy(c, 4, 3);
    Rng rng(seed);
    std::vector<std::size_t> actions;
    std::size_t step = 0;
    while (auto s = env.next_step()) {
        const std::size_t a = policy->select_action(s->context, s->eligible, rng);
        policy->observe(Round{step++, s->context, a, env.reward(a)});
        actions.push_back(a);
    }
    return actions;
}

}  // namespace

TEST_SUITE("selection") {
    TEST_CASE("uniform kind is uniform") {
        auto p = make_policy(config_for(PolicyKind::uniform), 7, 2);
        const auto freq = frequencies(*p, 7, FeatureVector{0.0, 0.0}, 100000, 3);
        for (double f : freq) CHECK(std::abs(f - 1.0 / 7.0) < 0.01);
    }

    TEST_CASE("eps_greedy with epsilon 1 matches uniform even with a trained model") {
        PolicyConfig c = config_for(PolicyKind::eps_greedy);
        c.epsilon = 1.0;
        EpsGreedyPolicy p(c, 5, 2);
        feed_dominant_arm(p, 5, 200, 4);
        REQUIRE(p.retrain_count() == 2);
        const auto freq = frequencies(p, 5, FeatureVector{0.1, 0.2}, 100000, 9);
        for (double f : freq) CHECK(std::abs(f - 0.2) < 0.01);
    }

    TEST_CASE("untrained rome_ucb ties across eligible actions") {
        PolicyConfig c = config_for(PolicyKind::rome_ucb);
        c.organic_rate = 0.0;
        auto p = make_policy(c, 6, 2);
        const ActionMask mask{true, false, true, true, false, true};
        const auto freq = frequencies(*p, 6, FeatureVector{0.0, 1.0}, 40000, 5, mask);
        CHECK(freq[1] == 0.0);
        CHECK(freq[4] == 0.0);
        for (std::size_t a : {0u, 2u, 3u, 5u}) CHECK(std::abs(freq[a] - 0.25) < 0.01);
    }

    TEST_CASE("argmax is invariant to a constant shift") {
        const std::vector<double> s{0.2, 0.9, 0.9, -1.0, 0.9};
        std::vector<double> shifted(s);
        for (double& v : shifted) v += 123.0;
        Rng a(1), b(1);
        for (int i = 0; i < 1000; ++i) CHECK(argmax_random_tie(s, {}, a) == argmax_random_tie(shifted, {}, b));
    }

    TEST_CASE("ties are split uniformly") {
        const std::vector<double> s{1.0, 0.0, 1.0, 1.0};
        Rng rng(2);
        std::vector<int> count(4, 0);
        for (int i = 0; i < 30000; ++i) ++count[argmax_random_tie(s, {}, rng)];
        CHECK(count[1] == 0);
        for (std::size_t a : {0u, 2u, 3u}) CHECK(std::abs(count[a] / 30000.0 - 1.0 / 3.0) < 0.015);
    }

    TEST_CASE("organic rate overlays uniform exploration") {
        PolicyConfig c = config_for(PolicyKind::eps_greedy);
        c.epsilon = 0.0;
        c.organic_rate = 0.2;
        EpsGreedyPolicy p(c, 4, 2);
        feed_dominant_arm(p, 4, 100, 1);
        const auto freq = frequencies(p, 4, FeatureVector{0.0, 0.0}, 100000, 2);
        CHECK(std::abs(freq[0] - (0.8 + 0.2 / 4)) < 0.01);
    }

    TEST_CASE("input validation") {
        auto p = make_policy(config_for(PolicyKind::rome_ts), 3, 2);
        Rng rng(1);
        CHECK_THROWS_AS(p->select_action(FeatureVector{1.0}, {}, rng), InvalidInput);
        CHECK_THROWS_AS(p->select_action(FeatureVector{1.0, 2.0}, ActionMask{false, false, false}, rng), InvalidInput);
        CHECK_THROWS_AS(p->select_action(FeatureVector{1.0, 2.0}, ActionMask{true, false}, rng), InvalidInput);
        CHECK_THROWS_AS(p->score_all(FeatureVector{1.0}, rng), InvalidInput);
        CHECK_THROWS_AS(p->observe(Round{0, {1.0, 2.0}, 3, 1}), InvalidInput);
        CHECK_THROWS_AS(p->observe(Round{0, {1.0, 2.0}, 0, 2}), InvalidInput);
        p->observe(Round{5, {1.0, 2.0}, 0, 1});
        CHECK_THROWS_AS(p->observe(Round{5, {1.0, 2.0}, 0, 1}), InvalidInput);
        CHECK_THROWS_AS(make_policy(config_for(PolicyKind::uniform), 1, 2), InvalidInput);
    }

    TEST_CASE("config validation") {
        PolicyConfig c = config_for(PolicyKind::rome_ts);
        c.overfit = c.tuned;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = config_for(PolicyKind::eps_greedy);
        c.epsilon = 1.5;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = config_for(PolicyKind::eps_greedy);
        c.retrain_every = 0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        CHECK(parse_policy_kind("bootstrap_ts") == PolicyKind::bootstrap_ts);
        CHECK_THROWS_AS(parse_policy_kind("softmax"), ConfigError);
        for (PolicyKind k : all_policy_kinds) CHECK(parse_policy_kind(to_string(k)) == k);
    }
}

TEST_SUITE("retraining") {
    TEST_CASE("retrain fires on the hundredth observation") {
        for (PolicyKind kind : all_policy_kinds) {
            auto p = make_policy(config_for(kind), 3, 2);
            for (std::uint64_t t = 0; t < 99; ++t) p->observe(Round{t, {0.1 * double(t), 1.0}, t % 3, int(t % 2)});
            CHECK(p->retrain_count() == 0);
            p->observe(Round{99, {1.0, 1.0}, 0, 1});
            CHECK(p->retrain_count() == 1);
        }
    }

    TEST_CASE("retrain on an empty buffer is an error") {
        for (PolicyKind kind : all_policy_kinds) {
            auto p = make_policy(config_for(kind), 3, 2);
            CHECK_THROWS_AS(p->retrain(), InvalidState);
        }
    }

    TEST_CASE("all-zero rewards give a near-zero model") {
        EpsGreedyPolicy p(config_for(PolicyKind::eps_greedy), 3, 2);
        feed_dominant_arm(p, 3, 300, 2);
        Rng rng(1);
        const auto s = p.score_all(FeatureVector{0.3, -0.3}, rng);
        CHECK(s[0] == doctest::Approx(1.0));
        CHECK(s[1] == doctest::Approx(0.0));
        CHECK(s[2] == doctest::Approx(0.0));
    }

    TEST_CASE("rome pairs are fit on disjoint halves per action") {
        RomePolicy p(config_for(PolicyKind::rome_ts), 3, 2);
        feed_dominant_arm(p, 3, 301, 3);  // 101 rounds on action 0
        p.retrain();
        REQUIRE(p.pair(0).has_value());
        CHECK(p.pair(0)->f.train_count() + p.pair(0)->g.train_count() == 101);
        CHECK(p.pair(0)->f.train_count() == 51);
        CHECK(p.pair(0)->split_mode == SplitMode::disjoint_split);
    }

    TEST_CASE("cold-start prior for unobserved actions") {
        RomePolicy p(config_for(PolicyKind::rome_ucb), 3, 2);
        p.observe(Round{0, {0.0, 0.0}, 0, 1});
        p.observe(Round{1, {1.0, 0.0}, 0, 0});
        p.retrain();
        const auto [f, g] = p.predict_pair(2, FeatureVector{0.0, 0.0});
        CHECK(f == RomePolicy::prior_f);
        CHECK(g == RomePolicy::prior_g);
        CHECK(p.pair(0).has_value());
        CHECK_FALSE(p.pair(1).has_value());
    }

    TEST_CASE("rome_ts scores are one Beta draw per action") {
        RomePolicy p(config_for(PolicyKind::rome_ts), 3, 2);
        feed_dominant_arm(p, 3, 300, 5);
        const FeatureVector x{0.2, 0.4};
        Rng a(77), b(77);
        const auto scores = p.score_all(x, a);
        for (std::size_t k = 0; k < 3; ++k) {
            const auto [f, g] = p.predict_pair(k, x);
            CHECK(scores[k] == ts_score(f, g, p.config().score, b));
        }
    }

    TEST_CASE("rome_ucb with alpha 0 is greedy on f") {
        PolicyConfig c = config_for(PolicyKind::rome_ucb);
        c.alpha = 0.0;
        c.organic_rate = 0.0;
        RomePolicy p(c, 4, 2);
        feed_dominant_arm(p, 4, 400, 6);
        Rng rng(3), ctx(4);
        std::normal_distribution<double> z(0.0, 1.0);
        for (int i = 0; i < 200; ++i) {
            const FeatureVector x{z(ctx), z(ctx)};
            const std::size_t a = p.select_action(x, {}, rng);
            double best = -1.0;
            for (std::size_t k = 0; k < 4; ++k) best = std::max(best, std::clamp(p.predict_pair(k, x).first, 1e-3, 1 - 1e-3));
            CHECK(std::clamp(p.predict_pair(a, x).first, 1e-3, 1 - 1e-3) == best);
        }
    }

    TEST_CASE("shared one-hot scope fits a single model") {
        PolicyConfig c = config_for(PolicyKind::rome_ucb);
        c.model_scope = ModelScope::shared_onehot;
        RomePolicy p(c, 3, 2);
        feed_dominant_arm(p, 3, 300, 1);
        CHECK(p.pair(0).has_value());
        CHECK(p.pair(0)->f.dim() == 5);
        const auto [f0, g0] = p.predict_pair(0, FeatureVector{0.0, 0.0});
        const auto [f1, g1] = p.predict_pair(1, FeatureVector{0.0, 0.0});
        CHECK(f0 > f1);
    }
}

TEST_SUITE("lin_ucb") {
    TEST_CASE("prior-only bonus on a unit vector") {
        PolicyConfig c = config_for(PolicyKind::lin_ucb);
        LinUcbPolicy p(c, 3, 2);
        Rng rng(1);
        const auto s = p.score_all(FeatureVector{0.6, 0.8}, rng);
        for (double v : s) CHECK(v == doctest::Approx(1.0));
    }

    TEST_CASE("one observation, hand-evaluated") {
        LinUcbPolicy p(config_for(PolicyKind::lin_ucb), 2, 1);
        p.observe(Round{0, {1.0}, 0, 1});
        CHECK(p.design(0)(0, 0) == doctest::Approx(2.0));
        CHECK(p.response(0)(0) == doctest::Approx(1.0));
        CHECK(p.theta(0)(0) == doctest::Approx(0.5));
        Rng rng(1);
        const auto s = p.score_all(FeatureVector{1.0}, rng);
        CHECK(s[0] == doctest::Approx(0.5 + std::sqrt(0.5)));
        CHECK(s[1] == doctest::Approx(1.0));
    }

    TEST_CASE("sherman-morrison inverse tracks a direct inverse") {
        LinUcbPolicy p(config_for(PolicyKind::lin_ucb), 2, 3);
        Rng rng(5);
        std::normal_distribution<double> z(0.0, 1.0);
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(3, 3);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(3);
        for (std::uint64_t t = 0; t < 250; ++t) {
            const FeatureVector x{z(rng), z(rng), z(rng)};
            const int r = z(rng) > 0 ? 1 : 0;
            p.observe(Round{t, x, 1, r});
            const Eigen::Map<const Eigen::VectorXd> v(x.data(), 3);
            A += v * v.transpose();
            b += r * v;
        }
        const Eigen::VectorXd theta = A.ldlt().solve(b);
        CHECK((p.theta(1) - theta).norm() < 1e-9);
        const FeatureVector q{0.3, -0.2, 1.0};
        const Eigen::Map<const Eigen::VectorXd> v(q.data(), 3);
        Rng r2(1);
        CHECK(p.score_all(q, r2)[1] ==
              doctest::Approx(theta.dot(v) + std::sqrt(v.dot(A.ldlt().solve(v)))).epsilon(1e-9));
    }

    TEST_CASE("unobserved arm bonus is positive") {
        PolicyConfig c = config_for(PolicyKind::lin_ucb);
        c.alpha = 0.7;
        LinUcbPolicy p(c, 2, 2);
        p.observe(Round{0, {1.0, 0.0}, 0, 1});
        Rng rng(1);
        for (const FeatureVector& x : {FeatureVector{1.0, 0.0}, FeatureVector{-2.0, 0.5}}) {
            const auto s = p.score_all(x, rng);
            CHECK(s[1] > 0.0);
            CHECK(s[1] == doctest::Approx(0.7 * std::hypot(x[0], x[1])));
        }
    }
}

TEST_SUITE("eps_greedy and bootstrap") {
    TEST_CASE("eps_greedy explores at the configured rate") {
        PolicyConfig c = config_for(PolicyKind::eps_greedy);
        c.epsilon = 0.2;
        c.organic_rate = 0.0;
        EpsGreedyPolicy p(c, 5, 2);
        feed_dominant_arm(p, 5, 500, 3);
        const auto freq = frequencies(p, 5, FeatureVector{0.0, 0.0}, 100000, 4);
        CHECK(std::abs((1.0 - freq[0]) - 0.2 * 4.0 / 5.0) < 0.01);
    }

    TEST_CASE("bootstrap keeps M models and picks uniformly") {
        BootstrapTsPolicy p(config_for(PolicyKind::bootstrap_ts), 3, 2);
        Rng rng(1);
        CHECK_THROWS_AS(p.bootstrap_pick_model(rng), InvalidState);
        feed_dominant_arm(p, 3, 100, 1);
        CHECK(p.model_count() == 20);
        std::vector<int> count(20, 0);
        for (int i = 0; i < 100000; ++i) ++count[p.bootstrap_pick_model(rng)];
        for (int c : count) CHECK(std::abs(c / 100000.0 - 0.05) < 0.005);

        Rng a(9), b(9);
        for (int i = 0; i < 50; ++i) CHECK(p.bootstrap_pick_model(a) == p.bootstrap_pick_model(b));
    }

    TEST_CASE("single replicate always picks index 0") {
        PolicyConfig c = config_for(PolicyKind::bootstrap_ts);
        c.m_replicates = 1;
        BootstrapTsPolicy p(c, 3, 2);
        feed_dominant_arm(p, 3, 100, 1);
        Rng rng(3);
        for (int i = 0; i < 100; ++i) CHECK(p.bootstrap_pick_model(rng) == 0);
    }

    TEST_CASE("score_all uses the picked replicate") {
        BootstrapTsPolicy p(config_for(PolicyKind::bootstrap_ts), 3, 2);
        feed_dominant_arm(p, 3, 200, 8);
        const FeatureVector x{0.5, -0.5};
        Rng a(4), b(4);
        const auto s = p.score_all(x, a);
        CHECK(s == p.score_replicate(p.bootstrap_pick_model(b), x));
    }

    TEST_CASE("replicates differ from each other") {
        BootstrapTsPolicy p(config_for(PolicyKind::bootstrap_ts), 2, 2);
        Rng rng(3);
        std::normal_distribution<double> z(0.0, 1.0);
        for (std::uint64_t t = 0; t < 100; ++t) {
            const double x0 = z(rng);
            p.observe(Round{t, {x0, z(rng)}, t % 2, x0 + 0.5 * z(rng) > 0 ? 1 : 0});
        }
        bool differ = false;
        for (std::size_t m = 1; m < p.model_count(); ++m)
            differ = differ || p.score_replicate(m, FeatureVector{0.1, 0.1}) != p.score_replicate(0, FeatureVector{0.1, 0.1});
        CHECK(differ);
    }
}

TEST_CASE("identical seeds give identical action sequences") {
    for (PolicyKind kind : all_policy_kinds) {
        CAPTURE(to_string(kind));
        CHECK(action_trace(kind, 11) == action_trace(kind, 11));
    }
    CHECK(action_trace(PolicyKind::rome_ts, 11) != action_trace(PolicyKind::rome_ts, 12));
}
