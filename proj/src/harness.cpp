#include "rome/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "rome/config.hpp"
#include "rome/error.hpp"

namespace rome {

std::string_view to_string(EnvironmentKind kind) {
    switch (kind) {
        case EnvironmentKind::synthetic: return "synthetic";
        case EnvironmentKind::synthetic_depleting: return "synthetic_depleting";
        case EnvironmentKind::covertype: return "covertype";
        case EnvironmentKind::chorales: return "chorales";
        case EnvironmentKind::movielens: return "movielens";
    }
    return "unknown";
}

EnvironmentKind parse_environment_kind(std::string_view name) {
    for (auto k : {EnvironmentKind::synthetic, EnvironmentKind::synthetic_depleting, EnvironmentKind::covertype,
                   EnvironmentKind::chorales, EnvironmentKind::movielens}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("unknown environment kind '" + std::string(name) + "'");
}

EnvironmentSource EnvironmentSource::load(const EnvironmentSpec& spec) {
    EnvironmentSource src;
    src.spec_ = spec;
    switch (spec.kind) {
        case EnvironmentKind::synthetic:
            src.classification_ =
                gen_synthetic_bandit(spec.n_actions, spec.dim, spec.n_instances, spec.data_seed, spec.separation);
            break;
        case EnvironmentKind::covertype: src.classification_ = load_covertype(spec.path); break;
        case EnvironmentKind::chorales: src.classification_ = load_chorales(spec.path); break;
        case EnvironmentKind::synthetic_depleting:
            src.depleting_ = std::make_shared<DepletingData>(build_depleting_data(
                gen_synthetic_interactions(spec.users, spec.items, spec.ratings_per_user, spec.data_seed),
                spec.data_seed, spec.context_dim));
            break;
        case EnvironmentKind::movielens:
            src.depleting_ = load_movielens_depleting(spec.path, spec.data_seed, spec.context_dim);
            break;
    }
    if (src.classification_) {
        src.n_actions_ = src.classification_->n_classes;
        src.dim_ = src.classification_->dim;
    } else {
        src.n_actions_ = src.depleting_->cold_items.size();
        src.dim_ = src.depleting_->context_dim;
    }
    return src;
}

std::unique_ptr<BanditEnvironment> EnvironmentSource::make(std::uint64_t seed) const {
    if (classification_) return std::make_unique<ClassificationEnv>(classification_, seed, spec_.row_cap);
    return std::make_unique<DepletingEnv>(depleting_, seed, spec_.passes);
}

void ExperimentConfig::validate() const {
    if (policies.empty()) throw ConfigError("at least one policy is required");
    if (replications < 1) throw ConfigError("replications must be >= 1");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (dataset.empty()) throw ConfigError("dataset name must not be empty");
    if (env.kind == EnvironmentKind::synthetic && horizon < env.n_actions) {
        throw ConfigError("horizon must be at least the number of actions");
    }
    policy.validate();
}

namespace {

template <typename E>
[[noreturn]] void rethrow_at_step(const E& e, std::size_t step) {
    throw E("step " + std::to_string(step) + ": " + e.what());
}

}  // namespace

LoopResult run_loop(BanditEnvironment& env, Policy& policy, std::size_t horizon, Rng& rng) {
    LoopResult out;
    out.rewards.reserve(horizon);
    const std::size_t k = env.n_actions();
    std::vector<bool> seen(k, false);
    std::size_t unseen = k;
    std::size_t step = 0;

    auto play = [&](const Step& s, std::size_t action) {
        const int r = env.reward(action);
        out.rewards.push_back(static_cast<std::uint8_t>(r));
        policy.observe(Round{step, s.context, action, r});
        if (!seen[action]) {
            seen[action] = true;
            --unseen;
        }
        ++step;
    };

    try {
        while (unseen > 0 && step < horizon) {
            auto s = env.next_step();
            if (!s) return out;
            play(*s, uniform_eligible(k, s->eligible, rng));
        }
        out.forced_steps = step;
        if (!policy.buffer().empty()) policy.retrain();
        while (step < horizon) {
            auto s = env.next_step();
            if (!s) break;
            play(*s, policy.select_action(s->context, s->eligible, rng));
        }
    } catch (const InvalidInput& e) {
        rethrow_at_step(e, step);
    } catch (const InvalidState& e) {
        rethrow_at_step(e, step);
    } catch (const ProtocolError& e) {
        rethrow_at_step(e, step);
    } catch (const ConfigError& e) {
        rethrow_at_step(e, step);
    }
    return out;
}

ReplicationSeeds replication_seeds(std::uint64_t base_seed, std::size_t replication, PolicyKind kind) {
    return {derive_seed(base_seed, 0x656E76, replication),
            derive_seed(base_seed, 0x706F6C, replication, static_cast<std::uint64_t>(kind))};
}

ReplicationResult run_replication(const EnvironmentSource& source, const ExperimentConfig& config, PolicyKind kind,
                                  std::size_t replication) {
    const auto seeds = replication_seeds(config.seed, replication, kind);
    PolicyConfig pc = config.policy;
    pc.kind = kind;
    pc.seed = seeds.policy;
    auto env = source.make(seeds.environment);
    auto policy = make_policy(pc, env->n_actions(), env->dim());
    Rng rng(derive_seed(seeds.policy, 1));
    auto loop = run_loop(*env, *policy, config.horizon, rng);
    return ReplicationResult{kind, replication, seeds.policy, std::move(loop.rewards), loop.forced_steps};
}

double average_regret(std::span<const std::uint8_t> rewards) {
    if (rewards.empty()) throw InvalidInput("average_regret of an empty series");
    const double total = std::accumulate(rewards.begin(), rewards.end(), 0.0);
    return 1.0 - total / static_cast<double>(rewards.size());
}

double t_quantile_975(std::size_t dof) {
    if (dof == 0) throw InvalidInput("t quantile needs at least one degree of freedom");
    boost::math::students_t dist(static_cast<double>(dof));
    return boost::math::quantile(dist, 0.975);
}

RegretSummary summarize(std::string policy, std::vector<double> regrets) {
    if (regrets.empty()) throw InvalidInput("summarize needs at least one replication");
    RegretSummary s;
    s.policy = std::move(policy);
    const auto n = static_cast<double>(regrets.size());
    s.mean = std::accumulate(regrets.begin(), regrets.end(), 0.0) / n;
    if (regrets.size() > 1) {
        double ss = 0.0;
        for (double r : regrets) ss += (r - s.mean) * (r - s.mean);
        const double sd = std::sqrt(ss / (n - 1.0));
        s.ci95_halfwidth = t_quantile_975(regrets.size() - 1) * sd / std::sqrt(n);
        s.ci_defined = true;
    }
    s.regrets = std::move(regrets);
    return s;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const EnvironmentSource& source, std::size_t jobs) {
    config.validate();
    const std::size_t n_runs = config.policies.size() * config.replications;
    ExperimentResult result;
    result.runs.resize(n_runs);
    std::vector<std::exception_ptr> errors(n_runs);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n_runs; i = next++) {
            const PolicyKind kind = config.policies[i / config.replications];
            try {
                result.runs[i] = run_replication(source, config, kind, i % config.replications);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    jobs = std::clamp<std::size_t>(jobs, 1, n_runs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    for (std::size_t p = 0; p < config.policies.size(); ++p) {
        std::vector<double> regrets;
        std::vector<double> cumulative;
        for (std::size_t r = 0; r < config.replications; ++r) {
            const auto& run = result.runs[p * config.replications + r];
            regrets.push_back(average_regret(run.rewards));
            if (cumulative.size() < run.rewards.size()) cumulative.resize(run.rewards.size(), 0.0);
            double c = 0.0;
            for (std::size_t t = 0; t < run.rewards.size(); ++t) {
                c += run.rewards[t];
                cumulative[t] += c;
            }
        }
        auto summary = summarize(std::string(to_string(config.policies[p])), std::move(regrets));
        for (double& c : cumulative) c /= static_cast<double>(config.replications);
        summary.mean_cumulative_reward = std::move(cumulative);
        result.summaries.push_back(std::move(summary));
    }
    return result;
}

namespace {

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << content;
    out.close();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

std::string summary_csv(const ExperimentResult& result, const ExperimentConfig& config) {
    std::ostringstream os;
    os << summary_header << '\n';
    for (const auto& s : result.summaries) {
        os << s.policy << ',' << config.dataset << ',' << s.regrets.size() << ',' << fixed6(s.mean) << ','
           << fixed6(s.ci95_halfwidth) << '\n';
    }
    return os.str();
}

std::string series_filename(const ReplicationResult& run) {
    char rep[16];
    std::snprintf(rep, sizeof rep, "%02zu", run.replication);
    return std::string(to_string(run.kind)) + "_rep" + rep + "_seed" + std::to_string(run.seed) + ".csv";
}

void persist_results(const ExperimentResult& result, const ExperimentConfig& config, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "series", ec);
    if (ec) throw IoError("cannot create '" + (dir / "series").string() + "': " + ec.message());

    for (const auto& run : result.runs) {
        std::string body = std::string(series_header) + '\n';
        std::uint64_t cumulative = 0;
        for (std::size_t t = 0; t < run.rewards.size(); ++t) {
            cumulative += run.rewards[t];
            body += std::to_string(t) + ',' + std::to_string(run.rewards[t]) + ',' + std::to_string(cumulative) + '\n';
        }
        write_file(dir / "series" / series_filename(run), body);
    }
    write_file(dir / "summary.csv", summary_csv(result, config));
    write_file(dir / "config.txt", render(to_key_values(config)));
}

}  // namespace rome
