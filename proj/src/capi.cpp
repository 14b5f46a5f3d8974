#include "mset/mset.h"

#include "mset/config.hpp"
#include "mset/format.hpp"
#include "mset/log.hpp"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <thread>

struct mset_config {
    mset::RunConfig cfg;
};

struct mset_op {
    mset::OperatingPoint op;
    std::shared_ptr<const mset::Mesh> mesh;
};

struct mset_statemap {
    mset::StateMap map;
};

namespace {

thread_local std::string last_error;
thread_local std::string last_trace;

mset_status fail(mset_status s, const std::string& msg) {
    last_error = msg;
    return s;
}

template <typename F>
mset_status guarded(F&& body, mset_status solver_status = MSET_ERR_INTERNAL) {
    last_error.clear();
    try {
        return body();
    } catch (const mset::ConvergenceError& e) {
        std::ostringstream ss;
        e.trace().write_csv(ss);
        last_trace = ss.str();
        return fail(MSET_ERR_CONVERGENCE, e.what());
    } catch (const mset::LinearSolveError& e) {
        return fail(MSET_ERR_CONVERGENCE, e.what());
    } catch (const mset::ParseError& e) {
        return fail(MSET_ERR_VALIDATION, e.what());
    } catch (const mset::ValidationError& e) {
        return fail(MSET_ERR_VALIDATION, e.what());
    } catch (const mset::IoError& e) {
        return fail(MSET_ERR_IO, e.what());
    } catch (const mset::InvalidArgument& e) {
        return fail(MSET_ERR_ARGUMENT, e.what());
    } catch (const mset::Error& e) {
        return fail(solver_status, e.what());
    } catch (const std::bad_alloc&) {
        return fail(MSET_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(MSET_ERR_INTERNAL, e.what());
    }
}

char* dup(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) {
        throw std::bad_alloc();
    }
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

mset_status null_arg(const char* what) {
    return fail(MSET_ERR_ARGUMENT, std::string(what) + " is null");
}

int effective_jobs(int jobs) {
    if (jobs > 0) {
        return jobs;
    }
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

std::ofstream open_out(const std::string& path) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw mset::IoError("cannot write '" + path + "'");
    }
    return out;
}

std::vector<std::string> validation_problems(const mset::RunConfig& cfg) {
    std::vector<std::string> problems;
    mset::DeviceSpec spec;
    try {
        spec = cfg.device.build_spec();
    } catch (const mset::Error& e) {
        problems.push_back(std::string("device: ") + e.what());
        return problems;
    }
    for (const auto& v : mset::validate_spec(spec)) {
        problems.push_back(v.subject + ": " + v.message);
    }
    if (!problems.empty()) {
        return problems;
    }
    mset::Mesh mesh;
    try {
        mesh = mset::generate_mesh(spec, cfg.device.mesh);
    } catch (const mset::Error& e) {
        problems.push_back(std::string("mesh: ") + e.what());
        return problems;
    }
    try {
        cfg.circuit_template().validate(mesh);
    } catch (const mset::ValidationError& e) {
        std::istringstream lines(e.what());
        std::string line;
        std::getline(lines, line);
        while (std::getline(lines, line)) {
            problems.push_back("circuit: " + line.substr(line.find_first_not_of(' ')));
        }
    }
    if (cfg.sweep.gate1 == cfg.sweep.gate2) {
        problems.push_back("sweep: gate1 and gate2 are both '" + cfg.sweep.gate1 + "'");
    }
    for (const auto& [name, v] : cfg.circuit.drain_voltages) {
        if (name == cfg.sweep.gate1 || name == cfg.sweep.gate2) {
            problems.push_back("sweep: swept gate '" + name + "' is configured as a drain");
        }
    }
    for (const auto& [level, v] : cfg.logic.levels) {
        if (v > 0.0) {
            problems.push_back("logic: level " + std::to_string(level) + " is positive (" + mset::format_number(v) +
                               " V)");
        }
    }
    if (!cfg.logic.netlist.empty() && !std::filesystem::exists(cfg.logic.netlist)) {
        problems.push_back("logic: netlist '" + cfg.logic.netlist + "' does not exist");
    }
    return problems;
}

}  // namespace

extern "C" {

const char* mset_version(void) {
    return "1.0.0";
}

const char* mset_last_error(void) {
    return last_error.c_str();
}

const char* mset_last_trace_csv(void) {
    return last_trace.c_str();
}

void mset_set_warning_handler(mset_warning_fn fn, void* user) {
    if (!fn) {
        mset::set_warning_handler([](const std::string& msg) { std::fprintf(stderr, "warning: %s\n", msg.c_str()); });
        return;
    }
    mset::set_warning_handler([fn, user](const std::string& msg) { fn(msg.c_str(), user); });
}

void mset_string_free(char* s) {
    std::free(s);
}

mset_status mset_config_load(const char* path, mset_config** out) {
    if (!path) return null_arg("path");
    if (!out) return null_arg("out");
    *out = nullptr;
    return guarded([&] {
        auto c = std::make_unique<mset_config>();
        c->cfg = mset::load_run_config(path);
        *out = c.release();
        return MSET_OK;
    });
}

mset_status mset_config_parse(const char* yaml_text, const char* base_dir, mset_config** out) {
    if (!yaml_text) return null_arg("yaml_text");
    if (!out) return null_arg("out");
    *out = nullptr;
    return guarded([&] {
        auto c = std::make_unique<mset_config>();
        c->cfg = mset::parse_run_config(yaml_text, base_dir ? base_dir : ".");
        if (c->cfg.output.stem.empty()) {
            c->cfg.output.stem = "mset";
        }
        *out = c.release();
        return MSET_OK;
    });
}

void mset_config_free(mset_config* cfg) {
    delete cfg;
}

mset_status mset_config_set_output_dir(mset_config* cfg, const char* dir) {
    if (!cfg) return null_arg("cfg");
    if (!dir || !*dir) return fail(MSET_ERR_ARGUMENT, "output directory is empty");
    cfg->cfg.output.directory = dir;
    return MSET_OK;
}

mset_status mset_config_set_jobs(mset_config* cfg, int jobs) {
    if (!cfg) return null_arg("cfg");
    if (jobs < 0) return fail(MSET_ERR_ARGUMENT, "jobs must be >= 0");
    cfg->cfg.sweep.jobs = jobs;
    return MSET_OK;
}

mset_status mset_config_set_steps(mset_config* cfg, int steps1, int steps2) {
    if (!cfg) return null_arg("cfg");
    if (steps1 < 2 || steps2 < 2) return fail(MSET_ERR_ARGUMENT, "steps must be at least 2 per axis");
    cfg->cfg.sweep.steps1 = steps1;
    cfg->cfg.sweep.steps2 = steps2;
    return MSET_OK;
}

mset_status mset_config_set_contour_spacing(mset_config* cfg, double spacing) {
    if (!cfg) return null_arg("cfg");
    if (!(spacing > 0.0)) return fail(MSET_ERR_ARGUMENT, "contour spacing must be positive");
    cfg->cfg.sweep.contour_spacing = spacing;
    return MSET_OK;
}

const char* mset_config_output_dir(const mset_config* cfg) {
    return cfg ? cfg->cfg.output.directory.c_str() : "";
}

const char* mset_config_stem(const mset_config* cfg) {
    return cfg ? cfg->cfg.output.stem.c_str() : "";
}

const char* mset_config_netlist(const mset_config* cfg) {
    return cfg ? cfg->cfg.logic.netlist.c_str() : "";
}

const char* mset_config_hash(const mset_config* cfg) {
    return cfg ? cfg->cfg.hash.c_str() : "";
}

double mset_config_contour_spacing(const mset_config* cfg) {
    return cfg ? cfg->cfg.sweep.contour_spacing : 0.0;
}

int mset_config_wants_csv(const mset_config* cfg) {
    return cfg && cfg->cfg.output.csv ? 1 : 0;
}

int mset_config_wants_svg(const mset_config* cfg) {
    return cfg && cfg->cfg.output.svg ? 1 : 0;
}

mset_status mset_validate(const mset_config* cfg, char** report) {
    if (report) *report = nullptr;
    if (!cfg) return null_arg("cfg");
    return guarded([&] {
        const auto problems = validation_problems(cfg->cfg);
        std::string text;
        for (const auto& p : problems) {
            text += p + "\n";
        }
        if (report) {
            *report = dup(text);
        }
        if (!problems.empty()) {
            return fail(MSET_ERR_VALIDATION, std::to_string(problems.size()) + " violation(s)\n" + text);
        }
        return MSET_OK;
    });
}

mset_status mset_solve(const mset_config* cfg, double vg1, double vg2, mset_op** out) {
    if (!cfg) return null_arg("cfg");
    if (!out) return null_arg("out");
    *out = nullptr;
    return guarded(
        [&] {
            const mset::RunConfig& c = cfg->cfg;
            const mset::DeviceSpec spec = c.device.build_spec();
            mset::require_valid(spec);
            auto mesh = std::make_shared<const mset::Mesh>(mset::generate_mesh(spec, c.device.mesh));
            mset::CircuitConfig circuit = c.circuit_template();
            circuit.gate_voltages[c.sweep.gate1] = vg1;
            circuit.gate_voltages[c.sweep.gate2] = vg2;
            auto op = std::make_unique<mset_op>();
            op->op = mset::solve_operating_point(*mesh, circuit, c.solver);
            op->mesh = mesh;
            *out = op.release();
            return MSET_OK;
        },
        MSET_ERR_CONVERGENCE);
}

double mset_op_vout(const mset_op* op) {
    return op ? op->op.v_out : 0.0;
}

int mset_op_device_solves(const mset_op* op) {
    return op ? op->op.device_solves : 0;
}

mset_status mset_op_csv(const mset_op* op, char** header, char** row) {
    if (!op) return null_arg("op");
    return guarded([&] {
        std::ostringstream h;
        std::ostringstream r;
        mset::write_operating_point_header(h, op->op);
        mset::write_operating_point_row(r, op->op);
        if (header) *header = dup(h.str());
        if (row) *row = dup(r.str());
        return MSET_OK;
    });
}

mset_status mset_op_write_state(const mset_op* op, const char* path) {
    if (!op) return null_arg("op");
    if (!path) return null_arg("path");
    return guarded([&] {
        if (!op->op.field_state) {
            return fail(MSET_ERR_ARGUMENT, "operating point carries no field state");
        }
        std::ofstream out = open_out(path);
        const mset::Mesh& mesh = *op->mesh;
        const mset::FieldState& s = op->op.field_state->state;
        out << "x_um,y_um,psi_V,n_cm3,p_cm3\n";
        for (std::size_t k = 0; k < mesh.node_count(); ++k) {
            const mset::Point p = mesh.position(k);
            out << mset::format_number(p.x) << ',' << mset::format_number(p.y) << ','
                << mset::format_number(s.psi[k]) << ',' << mset::format_number(s.n[k]) << ','
                << mset::format_number(s.p[k]) << '\n';
        }
        if (!out) {
            throw mset::IoError(std::string("error while writing '") + path + "'");
        }
        return MSET_OK;
    });
}

void mset_op_free(mset_op* op) {
    delete op;
}

mset_status mset_statemap_run(const mset_config* cfg, mset_progress_fn progress, void* user, mset_statemap** out) {
    if (!cfg) return null_arg("cfg");
    if (!out) return null_arg("out");
    *out = nullptr;
    return guarded(
        [&] {
            const mset::RunConfig& c = cfg->cfg;
            const mset::DeviceSpec spec = c.device.build_spec();
            mset::require_valid(spec);
            const mset::Mesh mesh = mset::generate_mesh(spec, c.device.mesh);
            mset::SweepOptions so;
            so.gate1 = c.sweep.gate1;
            so.gate2 = c.sweep.gate2;
            so.tolerance = c.sweep.tolerance;
            so.jobs = effective_jobs(c.sweep.jobs);
            if (progress) {
                so.progress = [progress, user](std::size_t done, std::size_t total) { progress(done, total, user); };
            }
            auto m = std::make_unique<mset_statemap>();
            m->map = mset::sweep_gates(mesh, c.circuit_template(), c.sweep.vg1, c.sweep.vg2, c.sweep.steps1,
                                       c.sweep.steps2, c.solver, so);
            *out = m.release();
            return MSET_OK;
        },
        MSET_ERR_CONVERGENCE);
}

mset_status mset_statemap_read_csv(const char* path, mset_statemap** out) {
    if (!path) return null_arg("path");
    if (!out) return null_arg("out");
    *out = nullptr;
    return guarded([&] {
        auto m = std::make_unique<mset_statemap>();
        m->map = mset::read_statemap_csv(std::string(path));
        *out = m.release();
        return MSET_OK;
    });
}

mset_status mset_statemap_write_csv(const mset_statemap* map, const mset_config* cfg, const char* path) {
    if (!map) return null_arg("map");
    if (!path) return null_arg("path");
    return guarded([&] {
        std::ofstream out = open_out(path);
        mset::write_statemap_csv(out, map->map, cfg ? cfg->cfg.metadata() : mset::CsvMetadata{});
        if (!out) {
            throw mset::IoError(std::string("error while writing '") + path + "'");
        }
        return MSET_OK;
    });
}

mset_status mset_statemap_write_svg(const mset_statemap* map, const mset_config* cfg, double spacing,
                                    const char* path) {
    if (!map) return null_arg("map");
    if (!path) return null_arg("path");
    if (!(spacing > 0.0)) return fail(MSET_ERR_ARGUMENT, "contour spacing must be positive");
    return guarded([&] {
        mset::SvgOptions opt;
        opt.generator = std::string("mset ") + mset_version();
        opt.title = cfg ? cfg->cfg.output.stem + ": output voltage (V)" : "output voltage (V)";
        std::ofstream out = open_out(path);
        mset::render_statemap_svg(out, map->map, mset::extract_isolines(map->map, spacing), opt);
        if (!out) {
            throw mset::IoError(std::string("error while writing '") + path + "'");
        }
        return MSET_OK;
    });
}

size_t mset_statemap_rows(const mset_statemap* map) {
    return map ? map->map.rows() : 0;
}

size_t mset_statemap_cols(const mset_statemap* map) {
    return map ? map->map.cols() : 0;
}

size_t mset_statemap_count(const mset_statemap* map, const char* label) {
    if (!map || !label) {
        return 0;
    }
    try {
        return map->map.count(mset::parse_label(label));
    } catch (const mset::Error&) {
        return 0;
    }
}

size_t mset_statemap_isoline_levels(const mset_statemap* map, double spacing) {
    if (!map || !(spacing > 0.0)) {
        return 0;
    }
    try {
        return mset::extract_isolines(map->map, spacing).size();
    } catch (const std::exception&) {
        return 0;
    }
}

size_t mset_statemap_failure_count(const mset_statemap* map) {
    return map ? map->map.failures.size() : 0;
}

const char* mset_statemap_failure(const mset_statemap* map, size_t index) {
    if (!map || index >= map->map.failures.size()) {
        return nullptr;
    }
    return map->map.failures[index].c_str();
}

void mset_statemap_free(mset_statemap* map) {
    delete map;
}

mset_status mset_logic_truth_table(const mset_config* cfg, const char* netlist_path, char** csv, size_t* rows) {
    if (!cfg) return null_arg("cfg");
    if (csv) *csv = nullptr;
    return guarded([&] {
        const std::string path = netlist_path ? netlist_path : cfg->cfg.logic.netlist;
        if (path.empty()) {
            return fail(MSET_ERR_ARGUMENT, "no netlist given and the config has no logic.netlist");
        }
        const mset::NetlistFile nf = mset::load_netlist(path, cfg->cfg.logic.levels);
        std::vector<std::pair<std::string, std::vector<int>>> enumerate = nf.enumerate;
        if (enumerate.empty() && nf.fixed.empty()) {
            for (const auto& name : nf.net.input_names()) {
                enumerate.emplace_back(name, std::vector<int>{0, 1});
            }
        }
        const mset::TruthTable table = mset::truth_table(nf.net, enumerate, nf.fixed);
        std::ostringstream ss;
        mset::write_truth_table_csv(ss, table);
        if (csv) *csv = dup(ss.str());
        if (rows) *rows = table.rows.size();
        return MSET_OK;
    });
}

}  // extern "C"
