#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <unistd.h>

#include "doctest.h"
#include "rome/config.hpp"
#include "rome/error.hpp"
#include "rome/harness.hpp"
#include "rome/proposition.hpp"

using namespace rome;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("rome_harness_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// Test-only policy with oracle access to the pending label.
class OraclePolicy final : public Policy {
public:
    OraclePolicy(const ClassificationEnv& env, PolicyConfig c) : Policy(c, env.n_actions(), env.dim()), env_(env) {}
    std::vector<double> score_all(FeatureView, Rng&) override {
        std::vector<double> s(n_actions_, 0.0);
        s[env_.pending_label()] = 1.0;
        return s;
    }

private:
    const ClassificationEnv& env_;
};

// Fails once the buffer reaches a fixed size.
class FailingPolicy final : public Policy {
public:
    FailingPolicy(PolicyConfig c, std::size_t k, std::size_t d, std::size_t fail_at) : Policy(c, k, d), fail_at_(fail_at) {}
    std::vector<double> score_all(FeatureView, Rng&) override {
        if (buffer_.size() >= fail_at_) throw InvalidState("model exploded");
        return std::vector<double>(n_actions_, 0.0);
    }

private:
    std::size_t fail_at_;
};

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.env.n_actions = 4;
    c.env.dim = 3;
    c.env.n_instances = 400;
    c.horizon = 150;
    c.replications = 2;
    c.policy.m_replicates = 3;
    return c;
}

}  // namespace

TEST_SUITE("loop") {
    TEST_CASE("forced initialization covers every action") {
        auto data = gen_synthetic_bandit(9, 2, 2000, 1);
        ClassificationEnv env(data, 2);
        PolicyConfig c;
        c.kind = PolicyKind::rome_ucb;
        auto p = make_policy(c, 9, 2);
        Rng rng(3);
        const auto out = run_loop(env, *p, 500, rng);
        CHECK(out.rewards.size() == 500);
        REQUIRE(out.forced_steps >= 9);
        std::set<std::size_t> seen;
        for (std::size_t i = 0; i < out.forced_steps; ++i) seen.insert(p->buffer()[i].action);
        CHECK(seen.size() == 9);
        // The last forced step is the first time the final action appears.
        std::set<std::size_t> before;
        for (std::size_t i = 0; i + 1 < out.forced_steps; ++i) before.insert(p->buffer()[i].action);
        CHECK(before.size() == 8);
        CHECK(p->retrain_count() >= 1);
    }

    TEST_CASE("stream exhaustion ends the loop early") {
        auto data = gen_synthetic_bandit(3, 2, 50, 1);
        ClassificationEnv env(data, 2);
        PolicyConfig c;
        c.kind = PolicyKind::uniform;
        auto p = make_policy(c, 3, 2);
        Rng rng(1);
        CHECK(run_loop(env, *p, 1000, rng).rewards.size() == 50);
    }

    TEST_CASE("omniscient policy has zero regret") {
        auto data = gen_synthetic_bandit(5, 2, 1000, 4);
        ClassificationEnv env(data, 2);
        PolicyConfig c;
        c.kind = PolicyKind::uniform;
        c.organic_rate = 0.0;
        OraclePolicy p(env, c);
        Rng rng(1);
        auto out = run_loop(env, p, 1000, rng);
        // The forced uniform phase is excluded.
        const std::span<const std::uint8_t> tail(out.rewards.data() + out.forced_steps,
                                                 out.rewards.size() - out.forced_steps);
        CHECK(average_regret(tail) == 0.0);
    }

    TEST_CASE("errors carry the step index") {
        auto data = gen_synthetic_bandit(3, 2, 200, 1);
        ClassificationEnv env(data, 2);
        PolicyConfig c;
        c.kind = PolicyKind::uniform;
        c.organic_rate = 0.0;
        FailingPolicy p(c, 3, 2, 40);
        Rng rng(1);
        try {
            run_loop(env, p, 200, rng);
            FAIL("expected InvalidState");
        } catch (const InvalidState& e) {
            CHECK(std::string(e.what()).rfind("step 40: ", 0) == 0);
        }
    }
}

TEST_SUITE("statistics") {
    TEST_CASE("average regret") {
        CHECK(average_regret(std::vector<std::uint8_t>{1, 1, 1}) == 0.0);
        CHECK(average_regret(std::vector<std::uint8_t>{0, 0}) == 1.0);
        CHECK(average_regret(std::vector<std::uint8_t>{1, 0, 1, 0}) == 0.5);
        CHECK_THROWS_AS(average_regret(std::vector<std::uint8_t>{}), InvalidInput);
    }

    TEST_CASE("t quantiles") {
        CHECK(t_quantile_975(1) == doctest::Approx(12.7062).epsilon(1e-4));
        CHECK(t_quantile_975(9) == doctest::Approx(2.2622).epsilon(1e-4));
        CHECK(t_quantile_975(1000) == doctest::Approx(1.9623).epsilon(1e-3));
        CHECK_THROWS_AS(t_quantile_975(0), InvalidInput);
    }

    TEST_CASE("summaries") {
        const auto same = summarize("p", std::vector<double>(10, 0.3));
        CHECK(same.mean == doctest::Approx(0.3));
        CHECK(same.ci95_halfwidth == doctest::Approx(0.0));
        const auto two = summarize("p", {0.4, 0.6});
        CHECK(two.mean == doctest::Approx(0.5));
        CHECK(two.ci95_halfwidth == doctest::Approx(12.7062 * std::sqrt(0.02) / std::sqrt(2.0)).epsilon(1e-4));
        // n - 1 sample deviation of {0.4, 0.6} is 0.1 * sqrt(2).
        CHECK(two.ci95_halfwidth == doctest::Approx(1.2706).epsilon(1e-3));
        const auto one = summarize("p", {0.7});
        CHECK(one.ci95_halfwidth == 0.0);
        CHECK_FALSE(one.ci_defined);
        CHECK_THROWS_AS(summarize("p", {}), InvalidInput);
    }
}

TEST_SUITE("experiments") {
    TEST_CASE("results are a pure function of config and seed") {
        const auto config = small_config();
        const auto source = EnvironmentSource::load(config.env);
        const auto a = run_experiment(config, source, 1);
        const auto b = run_experiment(config, source, 3);
        REQUIRE(a.runs.size() == 12);
        for (std::size_t i = 0; i < a.runs.size(); ++i) CHECK(a.runs[i].rewards == b.runs[i].rewards);
        for (const auto& s : a.summaries) {
            for (double r : s.regrets) {
                CHECK(r >= 0.0);
                CHECK(r <= 1.0);
            }
            CHECK(s.ci95_halfwidth >= 0.0);
            CHECK(s.mean_cumulative_reward.size() == config.horizon);
        }
    }

    TEST_CASE("replication seeds") {
        const auto a = replication_seeds(1, 0, PolicyKind::rome_ts);
        const auto b = replication_seeds(1, 0, PolicyKind::uniform);
        const auto c = replication_seeds(1, 1, PolicyKind::rome_ts);
        CHECK(a.environment == b.environment);
        CHECK(a.policy != b.policy);
        CHECK(a.environment != c.environment);
    }

    TEST_CASE("persisted files") {
        TempDir one("a"), two("b");
        ExperimentConfig config = small_config();
        config.replications = 10;
        config.horizon = 20;
        config.policy.retrain_every = 10;
        const auto source = EnvironmentSource::load(config.env);
        const auto result = run_experiment(config, source, 2);
        persist_results(result, config, one.path);
        persist_results(run_experiment(config, source, 1), config, two.path);

        std::size_t series = 0;
        for (const auto& e : fs::directory_iterator(one.path / "series")) {
            ++series;
            CHECK(slurp(e.path()) == slurp(two.path / "series" / e.path().filename()));
            CHECK(slurp(e.path()).rfind("step,reward,cumulative_reward\n", 0) == 0);
        }
        CHECK(series == 60);
        CHECK(slurp(one.path / "summary.csv") == slurp(two.path / "summary.csv"));
        CHECK(slurp(one.path / "summary.csv").rfind("policy,dataset,n_replications,mean_regret,ci95_halfwidth\n", 0) == 0);
        CHECK(slurp(one.path / "config.txt") == render(to_key_values(config)));
        CHECK(series_filename(result.runs[0]) ==
              "lin_ucb_rep00_seed" + std::to_string(result.runs[0].seed) + ".csv");

        const fs::path blocked = one.path / "file";
        std::ofstream(blocked) << "x";
        CHECK_THROWS_AS(persist_results(result, config, blocked / "sub"), IoError);
    }

    TEST_CASE("depleting experiment runs and audits") {
        ExperimentConfig c;
        c.env.kind = EnvironmentKind::synthetic_depleting;
        c.env.users = 30;
        c.env.items = 40;
        c.env.ratings_per_user = 20;
        c.env.context_dim = 8;
        c.env.passes = 3;
        c.horizon = 90;
        c.replications = 1;
        c.policies = {PolicyKind::rome_ucb};
        const auto source = EnvironmentSource::load(c.env);
        CHECK(source.n_actions() == 20);
        const auto result = run_experiment(c, source);
        CHECK(result.runs[0].rewards.size() == 90);
    }

    TEST_CASE("config validation") {
        ExperimentConfig c = small_config();
        c.horizon = 2;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = small_config();
        c.replications = 0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = small_config();
        c.policies.clear();
        CHECK_THROWS_AS(c.validate(), ConfigError);
        EnvironmentSpec missing;
        missing.kind = EnvironmentKind::covertype;
        missing.path = "/nonexistent/covtype.csv";
        CHECK_THROWS_AS(EnvironmentSource::load(missing), IoError);
    }
}

TEST_SUITE("config files") {
    TEST_CASE("parse, override and render") {
        std::istringstream in(
            "# experiment\n"
            "dataset = synth\n"
            "horizon = 300   # inline comment\n"
            "policies = rome_ts, uniform\n"
            "\n"
            "env.n_actions = 5\n"
            "tuned.max_depth = none\n"
            "policy.alpha = 0.5\n");
        auto kv = KeyValueConfig::parse(in);
        kv.apply_override("horizon=400");
        const auto c = experiment_from(kv);
        CHECK(c.dataset == "synth");
        CHECK(c.horizon == 400);
        CHECK(c.policies == std::vector<PolicyKind>{PolicyKind::rome_ts, PolicyKind::uniform});
        CHECK(c.env.n_actions == 5);
        CHECK_FALSE(c.policy.tuned.max_depth.has_value());
        CHECK(c.policy.alpha == 0.5);

        // Rendering covers every key and round-trips.
        const auto rendered = render(to_key_values(c));
        std::istringstream back(rendered);
        const auto c2 = experiment_from(KeyValueConfig::parse(back));
        CHECK(render(to_key_values(c2)) == rendered);
        CHECK(to_key_values(c).entries().size() == experiment_keys().size());
    }

    TEST_CASE("errors") {
        std::istringstream bad_line("horizon 300\n");
        try {
            KeyValueConfig::parse(bad_line, "x.cfg");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 1);
        }
        KeyValueConfig kv;
        kv.set("horizn", "3");
        CHECK_THROWS_AS(experiment_from(kv), ConfigError);
        kv = {};
        kv.set("horizon", "-3");
        CHECK_THROWS_AS(experiment_from(kv), ConfigError);
        kv = {};
        kv.set("policies", "rome_ts,softmax");
        CHECK_THROWS_AS(experiment_from(kv), ConfigError);
        kv = {};
        kv.set("tuned.n_trees", "1");
        kv.set("tuned.max_depth", "none");
        kv.set("tuned.bagging", "false");
        kv.set("tuned.min_samples_leaf", "1");
        kv.set("tuned.feature_subsample", "1");
        CHECK_THROWS_AS(experiment_from(kv), ConfigError);  // no longer more regularized than overfit
        CHECK_THROWS_AS(kv.apply_override("noequals"), ConfigError);
        CHECK_THROWS_AS(KeyValueConfig::load("/nonexistent/x.cfg"), IoError);
    }
}

TEST_SUITE("proposition") {
    TEST_CASE("frozen f is exact in expectation") {
        PropositionSetup s;
        s.n_draws = 1000;
        s.frozen_f = 0.0;
        s.seed = 3;
        const auto r = verify_proposition(s);
        CHECK(r.probes.size() == 5);
        CHECK(r.max_rel_error < 0.05);
        for (const auto& p : r.probes) {
            CHECK(p.mse_f == doctest::Approx(std::pow(2.0 + p.x, 2)));
            CHECK(p.var_g > 0.0);
        }
    }

    TEST_CASE("tuned and overfit pair at moderate draw count") {
        PropositionSetup s;
        s.n_draws = 2000;
        const auto r = verify_proposition(s);
        CHECK(r.max_rel_error < 0.1);
    }

    TEST_CASE("a single draw is a smoke test") {
        PropositionSetup s;
        s.n_draws = 1;
        const auto r = verify_proposition(s);
        for (const auto& p : r.probes) {
            CHECK(std::isfinite(p.lhs));
            CHECK(p.var_g == 0.0);
        }
        s.n_draws = 0;
        CHECK_THROWS_AS(verify_proposition(s), InvalidInput);
    }

    TEST_CASE("polynomial features") {
        CHECK(polynomial_features(2.0, 3) == FeatureVector{2.0, 4.0, 8.0});
        LabeledDataset wide(2);
        wide.add(FeatureVector{1.0, 2.0}, 0.0);
        CHECK_THROWS_AS(polynomial_features(wide, 2), InvalidInput);
    }

    TEST_CASE("noiseless abundant data leaves no residual overfit at the sites") {
        SyntheticSpec s = toy_spec_clustered();
        s.sigma = 0.0;
        s.h = TrueFunction::linear;
        UncertaintyOptions o;
        o.tuned = tuned_linear(1e-6);
        o.overfit = overfit_linear();
        o.grid_points = 13;  // grid hits the sites at -1, -0.5, 0, 0.5, 1
        const auto p = compare_uncertainty_maps(s, 1, o);
        for (std::size_t k = 0; k < p.grid.size(); ++k) {
            if (std::abs(p.grid[k]) <= 1.0 + 1e-9 && std::abs(std::fmod(p.grid[k] * 2, 1.0)) < 1e-9) {
                CHECK(p.residual[k] < 1e-4);
            }
        }
    }

    TEST_CASE("profiles have matching shapes") {
        const auto p = compare_uncertainty_maps(toy_spec_clustered(), 2);
        CHECK(p.samples.size() == 500);
        CHECK(p.split.size() == 500);
        for (const auto* v : {&p.truth, &p.f, &p.g, &p.residual, &p.rmse}) CHECK(v->size() == p.grid.size());
        UncertaintyOptions bad;
        bad.overfit = tuned_linear(5.0);
        CHECK_THROWS_AS(compare_uncertainty_maps(toy_spec_clustered(), 2, bad), ConfigError);
    }
}
