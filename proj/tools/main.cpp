// rgmb: optimal stopping of randomized Gauss-Markov bridges from the command line.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rgmb/cli.hpp"

namespace {

struct Common {
    std::string config_path;
    std::string preset;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::size_t workers = 0;
    bool paper_grid = false;
    bool dump_tables = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "Experiment configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--preset", c.preset, "Built-in configuration")
        ->check(CLI::IsMember({"figure1_xm1", "figure1_x0", "figure1_xp1", "figure2a", "figure2b", "figure2c"}));
    cmd->add_option("--out", c.out_dir, "Output directory");
    cmd->add_option("--seed", c.seed, "Master seed (overrides [grid] seed)");
    cmd->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_flag("--paper-grid", c.paper_grid, "Use N = M = 1000, K = 10000");
    cmd->add_flag("--dump-tables", c.dump_tables, "Write the time-change tabulation to timechange.csv");
}

rgmb::config::ExperimentConfig load(const Common& c) {
    using namespace rgmb::config;
    if (c.config_path.empty() == c.preset.empty()) {
        throw ParseError("give exactly one of --config and --preset");
    }
    Document doc = c.preset.empty() ? load_document(c.config_path) : parse_document(preset_text(c.preset));
    if (c.seed) doc.set("grid", "seed", "int", std::to_string(*c.seed));
    if (c.paper_grid) {
        doc.set("grid", "N", "int", "1000");
        doc.set("grid", "M", "int", "1000");
        doc.set("grid", "K", "int", "10000");
    }
    return build(std::move(doc));
}

void dump_tables(const rgmb::config::ExperimentConfig& cfg, const std::string& dir) {
    const rgmb::TimeChange tc = rgmb::TimeChange::build(cfg.model);
    std::filesystem::create_directories(dir);
    auto out = rgmb::io::open_out(dir + "/timechange.csv");
    out << "t,s,h,m,a1\n";
    const auto times = tc.table_times();
    const auto s = tc.table_s();
    for (std::size_t k = 0; k < times.size(); ++k) {
        using rgmb::io::format_double;
        out << format_double(times[k]) << ',' << format_double(s[k]) << ',' << format_double(tc.h(times[k]))
            << ',' << format_double(tc.m(times[k])) << ',' << format_double(tc.a1(s[k])) << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal stopping of randomized Gauss-Markov bridges"};
    app.require_subcommand(1);

    Common c;
    auto* solve = app.add_subcommand("solve", "Monte Carlo dynamic programming (and/or integral equation)");
    auto* validate = app.add_subcommand("validate", "Run the invariant checks; report.json");
    auto* simulate = app.add_subcommand("simulate", "Simulate conditioned paths; report.json");
    auto* volterra = app.add_subcommand("volterra", "Solve the free-boundary integral equation");
    for (auto* cmd : {solve, validate, simulate, volterra}) add_common(cmd, c);
    auto* render = app.add_subcommand("render", "Draw heatmap.svg from a result directory");
    std::string render_dir;
    render->add_option("--out,dir", render_dir, "Result directory holding V.csv and D.csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (render->parsed()) return rgmb::cli::cmd_render(render_dir);

    rgmb::config::ExperimentConfig cfg;
    try {
        cfg = load(c);
    } catch (const std::exception& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    }
    rgmb::cli::RunOptions opt;
    opt.out_dir = c.out_dir;
    opt.workers = c.workers;
    if (c.dump_tables) {
        try {
            dump_tables(cfg, c.out_dir.empty() ? cfg.out_dir : c.out_dir);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        }
    }
    if (solve->parsed()) return rgmb::cli::cmd_solve(cfg, opt);
    if (validate->parsed()) return rgmb::cli::cmd_validate(cfg, opt);
    if (simulate->parsed()) return rgmb::cli::cmd_simulate(cfg, opt);
    return rgmb::cli::cmd_volterra(cfg, opt);
}
