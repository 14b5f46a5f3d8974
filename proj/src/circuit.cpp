#include "mset/circuit.hpp"

#include "mset/format.hpp"
#include "mset/log.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <sstream>

namespace mset {

double CircuitConfig::max_drain_voltage() const {
    double v = 0.0;
    for (const auto& [name, vd] : drain_voltages) {
        v = std::max(v, vd);
    }
    return v;
}

BiasSet CircuitConfig::bias_at(double v_out) const {
    BiasSet b;
    for (const auto& [name, v] : drain_voltages) {
        b[name] = v;
    }
    for (const auto& [name, v] : gate_voltages) {
        b[name] = v;
    }
    b[output_contact] = v_out;
    return b;
}

void CircuitConfig::validate(const Mesh& mesh) const {
    std::vector<std::string> problems;
    if (!(load_resistor > 0.0) || !std::isfinite(load_resistor)) {
        problems.push_back("load_resistor must be positive and finite");
    }
    if (!(voltage_tolerance > 0.0)) {
        problems.push_back("voltage_tolerance must be positive");
    }
    if (drain_voltages.empty()) {
        problems.push_back("at least one drain voltage is required");
    }
    std::set<std::string> seen;
    auto claim = [&](const std::string& name, const char* role) {
        if (!seen.insert(name).second) {
            problems.push_back("contact '" + name + "' is assigned more than once");
        }
        if (!mesh.contact_nodes.count(name)) {
            problems.push_back(std::string(role) + " '" + name + "' is not a device contact");
        }
    };
    claim(output_contact, "output contact");
    for (const auto& [name, v] : drain_voltages) {
        claim(name, "drain");
        if (!std::isfinite(v)) {
            problems.push_back("drain '" + name + "' voltage is not finite");
        }
    }
    for (const auto& [name, v] : gate_voltages) {
        claim(name, "gate");
        if (!std::isfinite(v)) {
            problems.push_back("gate '" + name + "' voltage is not finite");
        }
    }
    for (const auto& [name, nodes] : mesh.contact_nodes) {
        if (!seen.count(name)) {
            problems.push_back("device contact '" + name + "' has no circuit voltage");
        }
    }
    if (!problems.empty()) {
        std::string msg = "invalid circuit:";
        for (const auto& p : problems) {
            msg += "\n  " + p;
        }
        throw ValidationError(msg);
    }
    for (const auto& [name, v] : drain_voltages) {
        if (v < 0.0) {
            warn("drain '" + name + "' is biased negative (" + format_number(v) + " V)");
        }
    }
    for (const auto& [name, v] : gate_voltages) {
        if (v > 0.0) {
            warn("gate '" + name + "' is biased positive (" + format_number(v) + " V); the junction is forward biased");
        }
    }
}

double OperatingPoint::output_current(const std::string& output_contact) const {
    auto it = terminal_currents.find(output_contact);
    return it == terminal_currents.end() ? 0.0 : -it->second;
}

void write_operating_point_header(std::ostream& os, const OperatingPoint& op) {
    for (const auto& [name, v] : op.gate_voltages) {
        os << name << "_V,";
    }
    os << "vout_V";
    for (const auto& [name, i] : op.terminal_currents) {
        os << ",I_" << name << "_A";
    }
    os << ",converged\n";
}

void write_operating_point_row(std::ostream& os, const OperatingPoint& op) {
    for (const auto& [name, v] : op.gate_voltages) {
        os << format_number(v) << ',';
    }
    os << format_number(op.v_out);
    for (const auto& [name, i] : op.terminal_currents) {
        os << ',' << format_number(i);
    }
    os << ',' << (op.converged ? "true" : "false") << '\n';
}

DeviceSolution equilibrium_solution(const Mesh& mesh, const SolverOptions& opts) {
    DeviceSolution s;
    for (const auto& [name, nodes] : mesh.contact_nodes) {
        s.bias[name] = 0.0;
    }
    s.state = gummel_solve(mesh, equilibrium_init(mesh), s.bias, opts).state;
    return s;
}

double device_current_at(const Mesh& mesh, const CircuitConfig& circuit, double v_out_trial,
                         const SolverOptions& opts, const DeviceSolution* warm, DeviceSolution* solved) {
    const double vmax = circuit.max_drain_voltage();
    if (!(v_out_trial >= 0.0 && v_out_trial <= vmax)) {
        throw InvalidArgument("trial output voltage " + format_number(v_out_trial) + " V is outside [0, " +
                              format_number(vmax) + "] V");
    }
    const BiasSet target = circuit.bias_at(v_out_trial);
    ContinuationResult r;
    if (warm) {
        r = continuation_solve(mesh, warm->bias, target, opts, warm->state);
    } else {
        const DeviceSolution eq = equilibrium_solution(mesh, opts);
        r = continuation_solve(mesh, eq.bias, target, opts, eq.state);
    }
    const double current = -compute_terminal_current(mesh, r.state, circuit.output_contact);
    if (solved) {
        solved->state = std::move(r.state);
        solved->bias = target;
    }
    return current;
}

DividerRoot solve_divider(const std::function<double(double)>& source_current, double v_max, double load_resistor,
                          double current_tolerance, std::optional<double> guess, int max_evaluations) {
    if (!(v_max >= 0.0) || !(load_resistor > 0.0) || !(current_tolerance > 0.0) || max_evaluations < 2) {
        throw InvalidArgument("divider solve needs v_max >= 0, R > 0, tolerance > 0 and at least 2 evaluations");
    }
    const double width_tol = 1e-3 * current_tolerance * load_resistor;
    DividerRoot out;
    auto f = [&](double v) {
        ++out.evaluations;
        return source_current(v) - v / load_resistor;
    };

    double lo = 0.0;
    double hi = v_max;
    double flo = NAN;
    double fhi = NAN;
    double slo = NAN;  // Illinois-scaled end values
    double shi = NAN;
    int last_side = 0;
    double v = std::clamp(guess.value_or(0.0), 0.0, v_max);
    double v_prev = NAN;
    double f_prev = NAN;
    double width_before = v_max;

    while (true) {
        const double fv = f(v);
        out.v_out = v;
        out.residual = fv;
        if (std::abs(fv) <= current_tolerance) {
            return out;
        }
        if (fv > 0.0 && v >= v_max) {
            throw Error("no operating point: output contact still delivers " + format_number(fv + v / load_resistor) +
                        " A at the maximum drain voltage " + format_number(v_max) + " V");
        }
        if (fv < 0.0 && v <= 0.0) {
            throw Error("no operating point: output contact sinks " + format_number(-fv) + " A at 0 V");
        }
        const int side = fv > 0.0 ? -1 : 1;
        if (side < 0) {
            lo = v;
            flo = slo = fv;
            if (last_side == -1 && !std::isnan(shi)) {
                shi *= 0.5;
            }
        } else {
            hi = v;
            fhi = shi = fv;
            if (last_side == 1 && !std::isnan(slo)) {
                slo *= 0.5;
            }
        }
        last_side = side;
        if (hi - lo <= width_tol) {
            return out;
        }
        if (out.evaluations >= max_evaluations) {
            throw Error("divider solve did not reach " + format_number(current_tolerance) + " A in " +
                        std::to_string(max_evaluations) + " evaluations (bracket [" + format_number(lo) + ", " +
                        format_number(hi) + "] V)");
        }

        double next;
        if (!std::isnan(flo) && !std::isnan(fhi)) {
            next = lo + slo * (hi - lo) / (slo - shi);
            const double width = hi - lo;
            const bool stalled = width > 0.5 * width_before;
            width_before = width;
            if (!(next > lo && next < hi) || (stalled && out.evaluations % 3 == 0)) {
                next = 0.5 * (lo + hi);
            }
        } else {
            // One-sided: I is non-increasing, so the slope of f is at most -1/R and
            // a step with that slope never falls short of the root.
            double slope = -1.0 / load_resistor;
            if (!std::isnan(v_prev) && v != v_prev) {
                slope = std::min(slope, (fv - f_prev) / (v - v_prev));
            }
            next = std::clamp(v - 2.0 * fv / slope, 0.0, v_max);
            if (std::isnan(fhi) && next <= v) {
                next = v_max;
            }
            if (std::isnan(flo) && next >= v) {
                next = 0.0;
            }
        }
        v_prev = v;
        f_prev = fv;
        v = next;
    }
}

OperatingPoint solve_operating_point(const Mesh& mesh, const CircuitConfig& circuit, const SolverOptions& opts,
                                     const OperatingPoint* warm) {
    circuit.validate(mesh);
    opts.validate(mesh.material);
    DeviceSolution current = warm && warm->field_state ? *warm->field_state : equilibrium_solution(mesh, opts);
    int solves = 0;
    auto source_current = [&](double v) {
        DeviceSolution next;
        const double i = device_current_at(mesh, circuit, v, opts, &current, &next);
        current = std::move(next);
        ++solves;
        return i;
    };
    std::optional<double> guess;
    if (warm && warm->field_state) {
        guess = std::clamp(warm->v_out, 0.0, circuit.max_drain_voltage());
    }
    const DividerRoot root = solve_divider(source_current, circuit.max_drain_voltage(), circuit.load_resistor,
                                           circuit.current_tolerance(), guess);
    OperatingPoint op;
    op.gate_voltages = circuit.gate_voltages;
    op.drain_voltages = circuit.drain_voltages;
    op.v_out = root.v_out;
    op.terminal_currents = terminal_currents(mesh, current.state);
    op.converged = true;
    op.device_solves = solves;
    op.field_state = std::make_shared<const DeviceSolution>(std::move(current));
    return op;
}

}  // namespace mset
