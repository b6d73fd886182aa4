#include "rome/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include "rome/error.hpp"

namespace rome {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

double as_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError("'" + std::string(key) + "': expected a number, got '" + std::string(v) + "'");
    }
    return out;
}

std::uint64_t as_uint(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError("'" + std::string(key) + "': expected a non-negative integer, got '" + std::string(v) + "'");
    }
    return out;
}

bool as_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("'" + std::string(key) + "': expected true/false, got '" + std::string(v) + "'");
}

struct Field {
    std::string key;
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Member>
Field number(std::string key, Member member) {
    return Field{key,
                 [key, member](ExperimentConfig& c, std::string_view v) {
                     auto& ref = member(c);
                     using T = std::remove_reference_t<decltype(ref)>;
                     if constexpr (std::is_same_v<T, double>) {
                         ref = as_double(key, v);
                     } else if constexpr (std::is_same_v<T, bool>) {
                         ref = as_bool(key, v);
                     } else {
                         ref = static_cast<T>(as_uint(key, v));
                     }
                 },
                 [member](const ExperimentConfig& c) {
                     auto& ref = member(const_cast<ExperimentConfig&>(c));
                     using T = std::remove_reference_t<decltype(ref)>;
                     if constexpr (std::is_same_v<T, double> || std::is_same_v<T, bool>) {
                         return fmt(ref);
                     } else {
                         return fmt(static_cast<std::uint64_t>(ref));
                     }
                 }};
}

void model_fields(std::vector<Field>& out, const std::string& prefix, ModelConfig PolicyConfig::*which) {
    auto m = [which](ExperimentConfig& c) -> ModelConfig& { return c.policy.*which; };
    out.push_back(Field{prefix + ".family",
                        [m](ExperimentConfig& c, std::string_view v) {
                            if (v == "linear_ridge") m(c).family = ModelFamily::linear_ridge;
                            else if (v == "tree_ensemble") m(c).family = ModelFamily::tree_ensemble;
                            else throw ConfigError("unknown model family '" + std::string(v) + "'");
                        },
                        [m](const ExperimentConfig& c) -> std::string {
                            return m(const_cast<ExperimentConfig&>(c)).family == ModelFamily::linear_ridge
                                       ? "linear_ridge"
                                       : "tree_ensemble";
                        }});
    out.push_back(number(prefix + ".ridge_lambda", [m](ExperimentConfig& c) -> double& { return m(c).ridge_lambda; }));
    out.push_back(number(prefix + ".fit_intercept", [m](ExperimentConfig& c) -> bool& { return m(c).fit_intercept; }));
    out.push_back(number(prefix + ".n_trees", [m](ExperimentConfig& c) -> std::size_t& { return m(c).n_trees; }));
    const std::string depth_key = prefix + ".max_depth";
    out.push_back(Field{depth_key,
                        [m, depth_key](ExperimentConfig& c, std::string_view v) {
                            if (v == "none") m(c).max_depth.reset();
                            else m(c).max_depth = static_cast<std::size_t>(as_uint(depth_key, v));
                        },
                        [m](const ExperimentConfig& c) -> std::string {
                            const auto& d = m(const_cast<ExperimentConfig&>(c)).max_depth;
                            return d ? std::to_string(*d) : "none";
                        }});
    out.push_back(
        number(prefix + ".min_samples_leaf", [m](ExperimentConfig& c) -> std::size_t& { return m(c).min_samples_leaf; }));
    out.push_back(number(prefix + ".bagging", [m](ExperimentConfig& c) -> bool& { return m(c).bagging; }));
    out.push_back(
        number(prefix + ".feature_subsample", [m](ExperimentConfig& c) -> double& { return m(c).feature_subsample; }));
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back(Field{"dataset", [](ExperimentConfig& c, std::string_view v) { c.dataset = std::string(v); },
                          [](const ExperimentConfig& c) { return c.dataset; }});
        f.push_back(number("horizon", [](ExperimentConfig& c) -> std::size_t& { return c.horizon; }));
        f.push_back(number("replications", [](ExperimentConfig& c) -> std::size_t& { return c.replications; }));
        f.push_back(number("seed", [](ExperimentConfig& c) -> std::uint64_t& { return c.seed; }));
        f.push_back(Field{"policies",
                          [](ExperimentConfig& c, std::string_view v) {
                              c.policies.clear();
                              std::size_t start = 0;
                              while (start <= v.size()) {
                                  const std::size_t comma = std::min(v.find(',', start), v.size());
                                  const auto name = trim(v.substr(start, comma - start));
                                  if (!name.empty()) c.policies.push_back(parse_policy_kind(name));
                                  start = comma + 1;
                              }
                          },
                          [](const ExperimentConfig& c) {
                              std::string s;
                              for (auto k : c.policies) s += (s.empty() ? "" : ",") + std::string(to_string(k));
                              return s;
                          }});

        f.push_back(Field{"env.kind",
                          [](ExperimentConfig& c, std::string_view v) { c.env.kind = parse_environment_kind(v); },
                          [](const ExperimentConfig& c) { return std::string(to_string(c.env.kind)); }});
        f.push_back(Field{"env.path", [](ExperimentConfig& c, std::string_view v) { c.env.path = std::string(v); },
                          [](const ExperimentConfig& c) { return c.env.path.string(); }});
        f.push_back(number("env.row_cap", [](ExperimentConfig& c) -> std::size_t& { return c.env.row_cap; }));
        f.push_back(number("env.n_actions", [](ExperimentConfig& c) -> std::size_t& { return c.env.n_actions; }));
        f.push_back(number("env.dim", [](ExperimentConfig& c) -> std::size_t& { return c.env.dim; }));
        f.push_back(number("env.n_instances", [](ExperimentConfig& c) -> std::size_t& { return c.env.n_instances; }));
        f.push_back(number("env.separation", [](ExperimentConfig& c) -> double& { return c.env.separation; }));
        f.push_back(number("env.context_dim", [](ExperimentConfig& c) -> std::size_t& { return c.env.context_dim; }));
        f.push_back(number("env.passes", [](ExperimentConfig& c) -> std::size_t& { return c.env.passes; }));
        f.push_back(number("env.users", [](ExperimentConfig& c) -> std::size_t& { return c.env.users; }));
        f.push_back(number("env.items", [](ExperimentConfig& c) -> std::size_t& { return c.env.items; }));
        f.push_back(
            number("env.ratings_per_user", [](ExperimentConfig& c) -> std::size_t& { return c.env.ratings_per_user; }));
        f.push_back(number("env.data_seed", [](ExperimentConfig& c) -> std::uint64_t& { return c.env.data_seed; }));

        f.push_back(number("policy.alpha", [](ExperimentConfig& c) -> double& { return c.policy.alpha; }));
        f.push_back(number("policy.epsilon", [](ExperimentConfig& c) -> double& { return c.policy.epsilon; }));
        f.push_back(number("policy.organic_rate", [](ExperimentConfig& c) -> double& { return c.policy.organic_rate; }));
        f.push_back(
            number("policy.retrain_every", [](ExperimentConfig& c) -> std::size_t& { return c.policy.retrain_every; }));
        f.push_back(
            number("policy.m_replicates", [](ExperimentConfig& c) -> std::size_t& { return c.policy.m_replicates; }));
        f.push_back(Field{"policy.model_scope",
                          [](ExperimentConfig& c, std::string_view v) { c.policy.model_scope = parse_model_scope(v); },
                          [](const ExperimentConfig& c) { return std::string(to_string(c.policy.model_scope)); }});
        f.push_back(Field{"policy.split_mode",
                          [](ExperimentConfig& c, std::string_view v) {
                              if (v == "disjoint_split") c.policy.split_mode = SplitMode::disjoint_split;
                              else if (v == "shared_data") c.policy.split_mode = SplitMode::shared_data;
                              else throw ConfigError("unknown split mode '" + std::string(v) + "'");
                          },
                          [](const ExperimentConfig& c) -> std::string {
                              return c.policy.split_mode == SplitMode::disjoint_split ? "disjoint_split"
                                                                                      : "shared_data";
                          }});
        f.push_back(number("policy.lin_ucb_ridge", [](ExperimentConfig& c) -> double& { return c.policy.lin_ucb_ridge; }));
        f.push_back(
            number("policy.pure_exploration", [](ExperimentConfig& c) -> bool& { return c.policy.score.pure_exploration; }));
        f.push_back(number("policy.eps_prob", [](ExperimentConfig& c) -> double& { return c.policy.score.eps_prob; }));
        f.push_back(number("policy.eps_var", [](ExperimentConfig& c) -> double& { return c.policy.score.eps_var; }));
        f.push_back(number("policy.max_var_fraction",
                           [](ExperimentConfig& c) -> double& { return c.policy.score.max_var_fraction; }));
        model_fields(f, "tuned", &PolicyConfig::tuned);
        model_fields(f, "overfit", &PolicyConfig::overfit);
        return f;
    }();
    return table;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& source) {
    KeyValueConfig out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view body = line;
        if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
        body = trim(body);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw ParseError(source, line_no, "expected 'key = value'");
        const auto key = trim(body.substr(0, eq));
        if (key.empty()) throw ParseError(source, line_no, "empty key");
        out.set(std::string(key), std::string(trim(body.substr(eq + 1))));
    }
    return out;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    return parse(in, path.string());
}

void KeyValueConfig::apply_override(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
    const auto key = trim(assignment.substr(0, eq));
    if (key.empty()) throw ConfigError("override has an empty key");
    set(std::string(key), std::string(trim(assignment.substr(eq + 1))));
}

std::string render(const KeyValueConfig& config) {
    std::string out;
    for (const auto& [k, v] : config.entries()) out += k + " = " + v + "\n";
    return out;
}

std::vector<std::string> experiment_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.push_back(f.key);
    return keys;
}

ExperimentConfig experiment_from(const KeyValueConfig& config) {
    ExperimentConfig out;
    for (const auto& [key, value] : config.entries()) {
        const auto& table = fields();
        const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
        if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
        it->set(out, value);
    }
    out.validate();
    return out;
}

KeyValueConfig to_key_values(const ExperimentConfig& config) {
    KeyValueConfig out;
    for (const auto& f : fields()) out.set(f.key, f.get(config));
    return out;
}

}  // namespace rome
