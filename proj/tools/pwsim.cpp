// pwsim: run Parzen-window / minimum-distance detection experiments over
// simulated dual-polarization fiber links.

#include "parzenfiber/parzenfiber.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace pf = parzenfiber;

namespace {

struct OutputOptions {
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format = "csv";
    std::string regions;
    unsigned regions_resolution = 161;
    std::string trace;
    std::vector<std::string> overrides;
};

void add_output_options(CLI::App* cmd, OutputOptions& o)
{
    cmd->add_option("--seed", o.seed, "Run a single seed instead of the configured list");
    cmd->add_option("--out", o.out, "Result table path (default: stdout)");
    cmd->add_option("--format", o.format, "Table format")->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--regions", o.regions, "Write PW decision regions of the first point (CSV re,im,label)");
    cmd->add_option("--regions-resolution", o.regions_resolution, "Decision-region grid points per axis");
    cmd->add_option("--trace", o.trace, "Write the per-span power trace of the first point (CSV)");
    cmd->add_option("--set", o.overrides, "Override a config key, key=value (repeatable)");
}

void apply_overrides(pf::ExperimentConfig& cfg, const OutputOptions& o)
{
    for (const auto& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        pf::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.seed) cfg.seeds = {*o.seed};
    pf::validate(cfg);
}

int execute(const pf::ExperimentConfig& cfg, const OutputOptions& o)
{
    const auto format = o.format == "json" ? pf::OutputFormat::JSON : pf::OutputFormat::CSV;

    if (!o.regions.empty() || !o.trace.empty()) {
        const auto first = pf::sweep_points(cfg).front();
        pf::PointArtifacts artifacts;
        pf::run_point(cfg, first, &artifacts);
        if (!o.trace.empty()) {
            std::ofstream t(o.trace);
            pf::write_power_trace_csv(t, artifacts.trace);
        }
        if (!o.regions.empty() && artifacts.training_x) {
            std::ofstream r(o.regions);
            pf::write_decision_regions_csv(r, *artifacts.training_x, {cfg.radii.front()}, o.regions_resolution);
        }
    }

    std::ofstream partial;
    std::filesystem::path partial_path;
    if (!o.out.empty()) {
        partial_path = o.out + ".partial";
        partial.open(partial_path);
        partial << pf::csv_header() << '\n';
    }
    const auto rows = pf::run_sweep(cfg, [&](const std::vector<pf::ResultRow>& batch) {
        for (const auto& r : batch) {
            if (partial.is_open()) partial << pf::to_csv(r) << '\n';
            if (r.detector == "error") std::cerr << "point failed: " << r.error << '\n';
        }
        if (partial.is_open()) partial.flush();
        std::cerr << "." << std::flush;
    });
    std::cerr << '\n';

    int failures = 0;
    for (const auto& r : rows) failures += r.detector == "error";
    if (o.out.empty()) {
        pf::write_table(std::cout, rows, format);
    } else {
        std::ofstream final_out(o.out);
        pf::write_table(final_out, rows, format);
        partial.close();
        std::filesystem::remove(partial_path);
    }
    return failures ? 2 : 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Parzen-window detection over simulated fiber links"};
    app.require_subcommand(1);

    OutputOptions run_opts;
    std::string config_path;
    auto* run = app.add_subcommand("run", "Run the sweep described by a config file");
    run->add_option("config", config_path, "Config file (key = value lines)")->required()->check(CLI::ExistingFile);
    add_output_options(run, run_opts);

    OutputOptions recipe_opts;
    std::string recipe_name;
    bool print_only = false;
    auto* rec = app.add_subcommand("recipe", "Run a named figure preset (fig3 ... fig8)");
    rec->add_option("name", recipe_name, "Recipe name")->required();
    rec->add_flag("--print", print_only, "Print the preset config instead of running it");
    add_output_options(rec, recipe_opts);

    OutputOptions sweep_opts;
    std::string base_config;
    std::string powers, radii, spans, seeds, dbp, style, detectors;
    unsigned modulation = 0;
    auto* sweep = app.add_subcommand("sweep", "Run a sweep from defaults with axis overrides");
    sweep->add_option("--config", base_config, "Base config file")->check(CLI::ExistingFile);
    sweep->add_option("--powers", powers, "Launch powers in dBm, list or start:stop:step");
    sweep->add_option("--radii", radii, "PW window radii, list or start:stop:step");
    sweep->add_option("--spans", spans, "Span counts, comma list");
    sweep->add_option("--seeds", seeds, "Seeds, comma list");
    sweep->add_option("--dbp", dbp, "DBP steps per span, comma list (0 = off)");
    sweep->add_option("--style", style, "DM or DUM");
    sweep->add_option("--detectors", detectors, "md, pw or md,pw");
    sweep->add_option("--modulation", modulation, "QAM order");
    add_output_options(sweep, sweep_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            auto cfg = pf::load_config(config_path);
            apply_overrides(cfg, run_opts);
            return execute(cfg, run_opts);
        }
        if (rec->parsed()) {
            auto cfg = pf::recipe(recipe_name);
            apply_overrides(cfg, recipe_opts);
            if (print_only) {
                std::cout << pf::to_text(cfg);
                return 0;
            }
            return execute(cfg, recipe_opts);
        }
        pf::ExperimentConfig cfg = base_config.empty() ? pf::ExperimentConfig{} : pf::load_config(base_config);
        const auto set_if = [&](const char* key, const std::string& v) {
            if (!v.empty()) pf::set_config_value(cfg, key, v);
        };
        set_if("powers_dbm", powers);
        set_if("radii", radii);
        set_if("span_counts", spans);
        set_if("seeds", seeds);
        set_if("style", style);
        set_if("dbp_steps", dbp);
        set_if("detectors", detectors);
        if (modulation) pf::set_config_value(cfg, "modulation", std::to_string(modulation));
        if (!dbp.empty() && dbp != "0") cfg.cd_compensation = false;
        apply_overrides(cfg, sweep_opts);
        return execute(cfg, sweep_opts);
    } catch (const std::exception& e) {
        std::cerr << "pwsim: " << e.what() << '\n';
        return 1;
    }
}
