#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rome/harness.hpp"

namespace rome {

/// Flat `key = value` text. Keys carry an optional section prefix
/// (`env.kind`, `tuned.n_trees`); `#` starts a comment.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::istream& in, const std::string& source = "<config>");
    static KeyValueConfig load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    /// "key=value"; throws ConfigError when '=' is missing.
    void apply_override(std::string_view assignment);

    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

/// Sorted `key = value` lines.
std::string render(const KeyValueConfig& config);

/// Every key accepted by experiment_from, in canonical order.
std::vector<std::string> experiment_keys();

/// Unknown keys and malformed values throw ConfigError.
ExperimentConfig experiment_from(const KeyValueConfig& config);
KeyValueConfig to_key_values(const ExperimentConfig& config);

}  // namespace rome
