// mset command-line front end. Talks to the simulator only through mset.h.

#include "mset/mset.h"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

namespace {

namespace fs = std::filesystem;

struct ConfigDeleter {
    void operator()(mset_config* c) const { mset_config_free(c); }
};
struct OpDeleter {
    void operator()(mset_op* o) const { mset_op_free(o); }
};
struct MapDeleter {
    void operator()(mset_statemap* m) const { mset_statemap_free(m); }
};
struct StringDeleter {
    void operator()(char* s) const { mset_string_free(s); }
};

using ConfigPtr = std::unique_ptr<mset_config, ConfigDeleter>;
using OpPtr = std::unique_ptr<mset_op, OpDeleter>;
using MapPtr = std::unique_ptr<mset_statemap, MapDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

int exit_code(mset_status s) {
    switch (s) {
        case MSET_OK:
            return 0;
        case MSET_ERR_IO:
            return 2;
        case MSET_ERR_CONVERGENCE:
            return 3;
        default:
            return 1;
    }
}

int report(mset_status s, const std::string& context) {
    if (s != MSET_OK) {
        std::cerr << "error: " << context << ": " << mset_last_error() << '\n';
    }
    return exit_code(s);
}

struct Globals {
    std::string output;
    bool quiet = false;
};

mset_status load(const std::string& path, const Globals& g, ConfigPtr& out) {
    mset_config* raw = nullptr;
    const mset_status s = mset_config_load(path.c_str(), &raw);
    out.reset(raw);
    if (s != MSET_OK) {
        return s;
    }
    if (!g.output.empty()) {
        return mset_config_set_output_dir(raw, g.output.c_str());
    }
    if (const char* env = std::getenv("MSET_OUTPUT_DIR"); env && *env) {
        return mset_config_set_output_dir(raw, env);
    }
    return MSET_OK;
}

std::string out_path(const mset_config* cfg, const std::string& suffix) {
    return (fs::path(mset_config_output_dir(cfg)) / (std::string(mset_config_stem(cfg)) + suffix)).string();
}

void progress(size_t done, size_t total, void* user) {
    auto* last = static_cast<size_t*>(user);
    const size_t decile = done * 10 / total;
    if (decile != *last || done == total) {
        *last = decile;
        std::cerr << "  " << done << "/" << total << " operating points\n";
    }
}

int cmd_validate(const std::string& config, const Globals& g) {
    ConfigPtr cfg;
    if (const mset_status s = load(config, g, cfg); s != MSET_OK) {
        return report(s, config);
    }
    char* raw = nullptr;
    const mset_status s = mset_validate(cfg.get(), &raw);
    StringPtr text(raw);
    if (s == MSET_OK) {
        std::cout << "ok: " << config << '\n';
        return 0;
    }
    if (s == MSET_ERR_VALIDATION && text) {
        std::cout << "invalid: " << config << '\n' << text.get();
        return 1;
    }
    return report(s, config);
}

int cmd_solve(const std::string& config, double vg1, double vg2, const std::string& dump, const Globals& g) {
    ConfigPtr cfg;
    if (const mset_status s = load(config, g, cfg); s != MSET_OK) {
        return report(s, config);
    }
    mset_op* raw = nullptr;
    const mset_status s = mset_solve(cfg.get(), vg1, vg2, &raw);
    OpPtr op(raw);
    if (s != MSET_OK) {
        const int code = report(s, "solve");
        if (s == MSET_ERR_CONVERGENCE && *mset_last_trace_csv()) {
            const std::string trace = out_path(cfg.get(), "_solve_trace.csv");
            std::error_code ec;
            fs::create_directories(fs::path(trace).parent_path(), ec);
            std::ofstream(trace) << mset_last_trace_csv();
            std::cerr << "trace: " << trace << '\n';
        }
        return code;
    }
    char* header = nullptr;
    char* row = nullptr;
    if (const mset_status c = mset_op_csv(op.get(), &header, &row); c != MSET_OK) {
        return report(c, "solve");
    }
    StringPtr h(header);
    StringPtr r(row);
    std::cout << h.get() << r.get();
    if (!dump.empty()) {
        if (const mset_status d = mset_op_write_state(op.get(), dump.c_str()); d != MSET_OK) {
            return report(d, "dump-state");
        }
        if (!g.quiet) {
            std::cerr << "field state: " << dump << '\n';
        }
    }
    return 0;
}

int write_map(const mset_statemap* map, const mset_config* cfg, const Globals& g) {
    if (mset_config_wants_csv(cfg)) {
        const std::string csv = out_path(cfg, "_statemap.csv");
        if (const mset_status s = mset_statemap_write_csv(map, cfg, csv.c_str()); s != MSET_OK) {
            return report(s, "csv");
        }
        if (!g.quiet) std::cout << "csv: " << csv << '\n';
    }
    if (mset_config_wants_svg(cfg)) {
        const std::string svg = out_path(cfg, "_statemap.svg");
        const double spacing = mset_config_contour_spacing(cfg);
        if (const mset_status s = mset_statemap_write_svg(map, cfg, spacing, svg.c_str()); s != MSET_OK) {
            return report(s, "svg");
        }
        if (!g.quiet) std::cout << "svg: " << svg << '\n';
    }
    return 0;
}

void print_summary(const mset_statemap* map, const mset_config* cfg) {
    std::cout << "grid: " << mset_statemap_rows(map) << "x" << mset_statemap_cols(map) << '\n';
    std::cout << "labels:";
    for (int k = 1; k <= 9; ++k) {
        const std::string label = "S" + std::to_string(k);
        if (const size_t n = mset_statemap_count(map, label.c_str())) {
            std::cout << ' ' << label << '=' << n;
        }
    }
    for (const char* label : {"OFF", "UNDEFINED", "FAILED"}) {
        std::cout << ' ' << label << '=' << mset_statemap_count(map, label);
    }
    std::cout << '\n';
    const double spacing = mset_config_contour_spacing(cfg);
    std::cout << "isolines: " << mset_statemap_isoline_levels(map, spacing) << " levels at " << spacing * 1000.0
              << " mV\n";
}

int cmd_statemap(const std::string& config, int jobs, int steps, double spacing, const Globals& g) {
    ConfigPtr cfg;
    if (const mset_status s = load(config, g, cfg); s != MSET_OK) {
        return report(s, config);
    }
    if (jobs >= 0) {
        if (const mset_status s = mset_config_set_jobs(cfg.get(), jobs); s != MSET_OK) return report(s, "--jobs");
    }
    if (steps > 0) {
        if (const mset_status s = mset_config_set_steps(cfg.get(), steps, steps); s != MSET_OK) {
            return report(s, "--steps");
        }
    }
    if (spacing > 0.0) {
        if (const mset_status s = mset_config_set_contour_spacing(cfg.get(), spacing); s != MSET_OK) {
            return report(s, "--spacing");
        }
    }
    size_t last = 0;
    mset_statemap* raw = nullptr;
    const mset_status s = mset_statemap_run(cfg.get(), g.quiet ? nullptr : progress, &last, &raw);
    MapPtr map(raw);
    if (s != MSET_OK) {
        return report(s, "statemap");
    }
    if (const int w = write_map(map.get(), cfg.get(), g); w != 0) {
        return w;
    }
    if (!g.quiet) {
        print_summary(map.get(), cfg.get());
    }
    const size_t failed = mset_statemap_failure_count(map.get());
    if (failed > 0) {
        std::cerr << "error: " << failed << " cell(s) FAILED\n";
        for (size_t i = 0; i < failed; ++i) {
            std::cerr << "  " << mset_statemap_failure(map.get(), i) << '\n';
        }
        return 3;
    }
    return 0;
}

int run_logic(const mset_config* cfg, const char* netlist, const Globals& g) {
    char* raw = nullptr;
    size_t rows = 0;
    const mset_status s = mset_logic_truth_table(cfg, netlist, &raw, &rows);
    StringPtr csv(raw);
    if (s != MSET_OK) {
        return report(s, "logic");
    }
    const std::string source = netlist ? netlist : mset_config_netlist(cfg);
    const std::string path = out_path(cfg, "_" + fs::path(source).stem().string() + "_truth.csv");
    std::error_code ec;
    fs::create_directories(fs::path(path).parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!(out << csv.get())) {
        std::cerr << "error: cannot write '" << path << "'\n";
        return 2;
    }
    std::cout << csv.get();
    if (!g.quiet) {
        std::cerr << rows << " rows -> " << path << '\n';
    }
    return 0;
}

int cmd_logic(const std::string& config, const std::string& netlist, const Globals& g) {
    ConfigPtr cfg;
    if (const mset_status s = load(config, g, cfg); s != MSET_OK) {
        return report(s, config);
    }
    return run_logic(cfg.get(), netlist.empty() ? nullptr : netlist.c_str(), g);
}

const char* demo_config = R"(device:
  builder: two_drain
  mesh: {nx: 32, ny: 22, refinement: 2}
circuit:
  load_resistor: 10e6
  drains: {d1: 0.75, d2: 0.5}
sweep:
  vg1: [-3, 0]
  vg2: [-3, 0]
  steps: 7
  contour_spacing: 0.05
logic:
  levels: {0: 0, 1: -3}
output:
  stem: demo
)";

const char* demo_netlist = R"(models:
  mux4: {kind: row_column}
elements:
  - {name: a0, type: input}
  - {name: a1, type: input}
  - {name: inv_a0, type: inverter, input: a0, output: na0}
  - {name: inv_a1, type: inverter, input: a1, output: na1}
  - {name: i0, type: constant, value: 0}
  - {name: i1, type: constant, value: 1}
  - {name: i2, type: constant, value: 2}
  - {name: i3, type: constant, value: 3}
  - {name: mux, type: mset, model: mux4, gates: [a0, na0, a1, na1], drains: [i0, i1, i2, i3], output: y}
  - {name: y, type: probe, input: y}
truth_table:
  enumerate: {a0: [0, 1], a1: [0, 1]}
)";

int cmd_demo(int jobs, const Globals& g) {
    mset_config* raw = nullptr;
    if (const mset_status s = mset_config_parse(demo_config, ".", &raw); s != MSET_OK) {
        return report(s, "demo config");
    }
    ConfigPtr cfg(raw);
    std::string dir = g.output;
    if (dir.empty()) {
        const char* env = std::getenv("MSET_OUTPUT_DIR");
        dir = env && *env ? env : "mset_demo";
    }
    mset_config_set_output_dir(cfg.get(), dir.c_str());
    if (jobs >= 0) {
        mset_config_set_jobs(cfg.get(), jobs);
    }
    std::cout << "two-drain device, coarse 7x7 gate sweep\n";
    size_t last = 0;
    mset_statemap* mraw = nullptr;
    const mset_status s = mset_statemap_run(cfg.get(), g.quiet ? nullptr : progress, &last, &mraw);
    MapPtr map(mraw);
    if (s != MSET_OK) {
        return report(s, "demo statemap");
    }
    if (const int w = write_map(map.get(), cfg.get(), g); w != 0) {
        return w;
    }
    print_summary(map.get(), cfg.get());

    const std::string netlist = (fs::path(dir) / "demo_mux4.yaml").string();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!(std::ofstream(netlist) << demo_netlist)) {
        std::cerr << "error: cannot write '" << netlist << "'\n";
        return 2;
    }
    std::cout << "\n4-input multiplexer, one 4-gate MSET and two inverters\n";
    return run_logic(cfg.get(), netlist.c_str(), g);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mset: split-drain EFN transistor simulator"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("-o,--output", g.output, "Output directory (overrides MSET_OUTPUT_DIR and the config)");
    app.add_flag("-q,--quiet", g.quiet, "Only print results");
    app.set_version_flag("--version", std::string("mset ") + mset_version());

    std::string config;
    auto* validate = app.add_subcommand("validate", "Check a config: device spec, mesh dry run, circuit, files");
    validate->add_option("config", config, "Config file")->required();

    double vg1 = 0.0;
    double vg2 = 0.0;
    std::string dump;
    auto* solve = app.add_subcommand("solve", "Solve one operating point and print it as CSV");
    solve->add_option("config", config, "Config file")->required();
    solve->add_option("--vg1", vg1, "Gate 1 voltage (V)")->required();
    solve->add_option("--vg2", vg2, "Gate 2 voltage (V)")->required();
    solve->add_option("--dump-state", dump, "Write the converged field state to this CSV file");

    int jobs = -1;
    int steps = 0;
    double spacing = 0.0;
    auto* statemap = app.add_subcommand("statemap", "Sweep the gate plane and write CSV and SVG state maps");
    statemap->add_option("config", config, "Config file")->required();
    statemap->add_option("-j,--jobs", jobs, "Concurrent sweep rows (default: available cores)")
        ->check(CLI::NonNegativeNumber);
    statemap->add_option("--steps", steps, "Grid points per axis")->check(CLI::Range(2, 100000));
    statemap->add_option("--spacing", spacing, "Iso-line spacing (V)")->check(CLI::PositiveNumber);

    std::string netlist;
    auto* logic = app.add_subcommand("logic", "Evaluate a netlist and write its truth table");
    logic->add_option("config", config, "Config file")->required();
    logic->add_option("netlist", netlist, "Netlist file (default: logic.netlist from the config)");

    auto* demo = app.add_subcommand("demo", "Coarse two-drain map and the 4-input multiplexer");
    demo->add_option("-j,--jobs", jobs, "Concurrent sweep rows (default: available cores)")
        ->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    if (g.quiet) {
        mset_set_warning_handler([](const char*, void*) {}, nullptr);
    }
    if (*validate) return cmd_validate(config, g);
    if (*solve) return cmd_solve(config, vg1, vg2, dump, g);
    if (*statemap) return cmd_statemap(config, jobs, steps, spacing, g);
    if (*logic) return cmd_logic(config, netlist, g);
    if (*demo) return cmd_demo(jobs, g);
    return 1;
}
