#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "rome/config.hpp"
#include "rome/error.hpp"
#include "rome/harness.hpp"
#include "rome/proposition.hpp"

namespace rome::cli {

namespace fs = std::filesystem;

namespace {

constexpr double band_multiplier = 2.58;
constexpr std::size_t min_asserted_draws = 1000;

std::string fmt(double v, int precision = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

void write_text(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << body;
    out.close();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

struct RunArgs {
    std::string config;
    std::vector<std::string> overrides;
    std::string out = "results";
    std::optional<std::uint64_t> seed;
    std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
};

int cmd_run(const RunArgs& a, std::ostream& out) {
    KeyValueConfig kv;
    if (!a.config.empty()) kv = KeyValueConfig::load(a.config);
    for (const auto& o : a.overrides) kv.apply_override(o);
    if (a.seed) kv.set("seed", std::to_string(*a.seed));
    const ExperimentConfig config = experiment_from(kv);

    const EnvironmentSource source = EnvironmentSource::load(config.env);
    const ExperimentResult result = run_experiment(config, source, a.jobs);
    persist_results(result, config, fs::path(a.out) / config.dataset);
    out << summary_csv(result, config);
    return exit_ok;
}

struct ToyArgs {
    std::string out = ".";
    std::uint64_t seed = 0;
};

int cmd_toy(const ToyArgs& a, std::ostream& out) {
    ensure_dir(a.out);

    const UncertaintyProfiles bands = compare_uncertainty_maps(toy_spec_scatter(), a.seed);
    std::string fit_csv = "x,y,split\n";
    for (std::size_t i = 0; i < bands.samples.size(); ++i) {
        fit_csv += fmt(bands.samples.row(i)[0]) + ',' + fmt(bands.samples.target(i)) + ',' +
                   (bands.split[i] == 0 ? "f" : "g") + '\n';
    }
    std::string bands_csv = "x,h,f,g,residual_overfit,band_99\n";
    for (std::size_t k = 0; k < bands.grid.size(); ++k) {
        bands_csv += fmt(bands.grid[k]) + ',' + fmt(bands.truth[k]) + ',' + fmt(bands.f[k]) + ',' +
                     fmt(bands.g[k]) + ',' + fmt(bands.residual[k]) + ',' +
                     fmt(band_multiplier * bands.residual[k]) + '\n';
    }

    const UncertaintyProfiles cmp = compare_uncertainty_maps(toy_spec_clustered(), a.seed);
    std::string cmp_csv = "x,h,f,g,residual_overfit,rmse_model\n";
    for (std::size_t k = 0; k < cmp.grid.size(); ++k) {
        cmp_csv += fmt(cmp.grid[k]) + ',' + fmt(cmp.truth[k]) + ',' + fmt(cmp.f[k]) + ',' + fmt(cmp.g[k]) + ',' +
                   fmt(cmp.residual[k]) + ',' + fmt(cmp.rmse[k]) + '\n';
    }

    const fs::path dir(a.out);
    write_text(dir / "toy_fit.csv", fit_csv);
    write_text(dir / "toy_bands.csv", bands_csv);
    write_text(dir / "toy_rmse_compare.csv", cmp_csv);
    out << "wrote " << (dir / "toy_fit.csv").string() << ", " << (dir / "toy_bands.csv").string() << ", "
        << (dir / "toy_rmse_compare.csv").string() << '\n';
    return exit_ok;
}

struct PropositionArgs {
    std::size_t draws = 10000;
    std::uint64_t seed = 0;
    double threshold = 0.05;
    std::optional<double> frozen_f;
};

int cmd_verify(const PropositionArgs& a, std::ostream& out, std::ostream& err) {
    if (a.draws < 1) throw ConfigError("--draws must be >= 1");
    if (!(a.threshold > 0.0)) throw ConfigError("--threshold must be positive");
    PropositionSetup setup;
    setup.n_draws = a.draws;
    setup.seed = a.seed;
    setup.frozen_f = a.frozen_f;
    const PropositionReport report = verify_proposition(setup);

    out << "x,lhs,rhs,mse_f,var_g,rel_error\n";
    for (const auto& p : report.probes) {
        out << fmt(p.x, 4) << ',' << fmt(p.lhs) << ',' << fmt(p.rhs) << ',' << fmt(p.mse_f) << ',' << fmt(p.var_g)
            << ',' << fmt(p.rel_error) << '\n';
    }
    out << "max_rel_error," << fmt(report.max_rel_error) << '\n';

    if (a.draws < min_asserted_draws) {
        err << "warning: " << a.draws << " draws is too few for a stable estimate; threshold not checked\n";
        return exit_ok;
    }
    if (report.max_rel_error > a.threshold) {
        err << "relative error " << fmt(report.max_rel_error) << " exceeds threshold " << fmt(a.threshold) << '\n';
        return exit_threshold;
    }
    return exit_ok;
}

struct SummaryRow {
    std::string mean;
    std::string ci;
};

int cmd_report(const std::string& dir, std::ostream& out) {
    if (!fs::is_directory(dir)) throw IoError("'" + dir + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const fs::path p = entry.path() / "summary.csv";
        if (entry.is_directory() && fs::is_regular_file(p)) files.push_back(p);
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no */summary.csv under '" + dir + "'");

    std::vector<std::string> datasets;
    std::vector<std::string> policies;
    std::map<std::pair<std::string, std::string>, SummaryRow> cells;
    for (const auto& path : files) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open '" + path.string() + "'");
        std::string line;
        if (!std::getline(in, line) || line != summary_header) {
            throw ParseError(path.string(), 1, "unexpected summary header");
        }
        std::string dataset;
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            std::vector<std::string> f;
            std::stringstream ss(line);
            for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
            if (f.size() != 5) throw ParseError(path.string(), line_no, "expected 5 columns");
            if (dataset.empty()) dataset = f[1];
            if (f[1] != dataset) throw ParseError(path.string(), line_no, "mixed datasets in one summary");
            if (std::find(datasets.begin(), datasets.end(), dataset) == datasets.end()) datasets.push_back(dataset);
            if (std::find(policies.begin(), policies.end(), f[0]) == policies.end()) policies.push_back(f[0]);
            if (!cells.emplace(std::pair{f[0], dataset}, SummaryRow{f[3], f[4]}).second) {
                throw ParseError(path.string(), line_no, "duplicate row for policy " + f[0]);
            }
        }
        if (dataset.empty()) throw ParseError(path.string(), line_no, "summary has no rows");
    }

    std::map<std::string, double> best;
    for (const auto& [key, row] : cells) {
        double v = 0.0;
        try {
            v = std::stod(row.mean);
        } catch (const std::exception&) {
            throw ParseError(key.second, 0, "non-numeric mean_regret '" + row.mean + "'");
        }
        auto [it, inserted] = best.emplace(key.second, v);
        if (!inserted) it->second = std::min(it->second, v);
    }

    out << "policy";
    for (const auto& d : datasets) out << ',' << d;
    out << '\n';
    for (const auto& p : policies) {
        out << p;
        for (const auto& d : datasets) {
            out << ',';
            const auto it = cells.find({p, d});
            if (it == cells.end()) continue;
            out << it->second.mean << " +- " << it->second.ci;
            if (std::stod(it->second.mean) == best[d]) out << " *";
        }
        out << '\n';
    }
    return exit_ok;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Residual-overfit exploration toolkit"};
    app.require_subcommand(1, 1);

    RunArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "Run bandit experiments and persist results");
    run_cmd->add_option("--config", run_args.config, "key = value config file")->check(CLI::ExistingFile);
    run_cmd->add_option("--override", run_args.overrides, "key=value override (repeatable)");
    run_cmd->add_option("--out", run_args.out, "Output root; results go to OUT/<dataset>");
    run_cmd->add_option("--seed", run_args.seed, "Base seed");
    run_cmd->add_option("--jobs", run_args.jobs, "Worker threads")->check(CLI::PositiveNumber);

    ToyArgs toy_args;
    auto* toy_cmd = app.add_subcommand("toy", "Emit toy uncertainty-band data as CSV");
    toy_cmd->add_option("--out", toy_args.out, "Output directory");
    toy_cmd->add_option("--seed", toy_args.seed, "Seed");

    PropositionArgs prop_args;
    auto* prop_cmd = app.add_subcommand("verify-proposition", "Monte-Carlo check of the residual-overfit identity");
    prop_cmd->add_option("--draws", prop_args.draws, "Dataset redraws");
    prop_cmd->add_option("--seed", prop_args.seed, "Seed");
    prop_cmd->add_option("--threshold", prop_args.threshold, "Maximum relative error");
    prop_cmd->add_option("--frozen-f", prop_args.frozen_f, "Replace the tuned model by this constant");

    std::string report_dir = "results";
    auto* report_cmd = app.add_subcommand("report", "Merge per-dataset summaries");
    report_cmd->add_option("--out", report_dir, "Directory holding <dataset>/summary.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    }

    try {
        if (run_cmd->parsed()) return cmd_run(run_args, out);
        if (toy_cmd->parsed()) return cmd_toy(toy_args, out);
        if (prop_cmd->parsed()) return cmd_verify(prop_args, out, err);
        if (report_cmd->parsed()) return cmd_report(report_dir, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    }
    return exit_usage;
}

}  // namespace rome::cli
