#include "mset/logic.hpp"

#include "mset/errors.hpp"
#include "mset/format.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <set>

namespace mset {

std::string to_string(const Level& level) {
    switch (level.kind) {
        case Level::Kind::value:
            return std::to_string(level.value);
        case Level::Kind::hiz:
            return "HiZ";
        case Level::Kind::undefined:
            break;
    }
    return "UNDEFINED";
}

std::string to_string(const Selection& selection) {
    switch (selection.kind) {
        case Selection::Kind::drain:
            return "d" + std::to_string(selection.drain + 1);
        case Selection::Kind::off:
            return "OFF";
        case Selection::Kind::undefined:
            break;
    }
    return "UNDEFINED";
}

namespace {

std::string tuple_text(const GateTuple& t) {
    std::string s = "(";
    for (std::size_t i = 0; i < t.size(); ++i) {
        s += (i ? "," : "") + std::to_string(t[i]);
    }
    return s + ")";
}

std::vector<GateTuple> all_tuples(const std::vector<int>& alphabet, int n) {
    std::vector<GateTuple> out;
    if (n <= 0 || alphabet.empty()) {
        return out;
    }
    GateTuple t(static_cast<std::size_t>(n), 0);
    std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
    while (true) {
        for (int k = 0; k < n; ++k) {
            t[static_cast<std::size_t>(k)] = alphabet[idx[static_cast<std::size_t>(k)]];
        }
        out.push_back(t);
        int k = n - 1;
        while (k >= 0 && ++idx[static_cast<std::size_t>(k)] == alphabet.size()) {
            idx[static_cast<std::size_t>(k)] = 0;
            --k;
        }
        if (k < 0) {
            return out;
        }
    }
}

std::vector<int> level_keys(const std::map<int, double>& levels) {
    std::vector<int> keys;
    for (const auto& [k, v] : levels) {
        keys.push_back(k);
    }
    return keys;
}

Selection selection_of(const StateLabel& label) {
    switch (label.kind) {
        case StateLabel::Kind::state:
            return Selection::of(label.drain - 1);
        case StateLabel::Kind::off:
            return Selection::off();
        default:
            return Selection::undefined();
    }
}

std::size_t nearest_index(const std::vector<double>& axis, double v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < axis.size(); ++i) {
        if (std::abs(axis[i] - v) < std::abs(axis[best] - v)) {
            best = i;
        }
    }
    return best;
}

}  // namespace

std::vector<GateTuple> BehavioralMSET::tuples() const {
    return all_tuples(level_keys(gate_levels), n_gates);
}

Selection BehavioralMSET::select(const GateTuple& gates) const {
    auto it = state_table.find(gates);
    if (it == state_table.end()) {
        throw InvalidArgument("gate tuple " + tuple_text(gates) + " is not in the state table");
    }
    return it->second;
}

void BehavioralMSET::check() const {
    std::vector<std::string> problems;
    if (n_gates < 1) {
        problems.push_back("n_gates must be at least 1");
    }
    if (n_drains < 1) {
        problems.push_back("n_drains must be at least 1");
    }
    if (gate_levels.empty()) {
        problems.push_back("no gate levels declared");
    }
    for (const auto& [level, v] : gate_levels) {
        if (!std::isfinite(v) || v > 0.0) {
            problems.push_back("gate level " + std::to_string(level) + " is " + format_number(v) +
                               " V; gate levels must be <= 0 V");
        }
    }
    for (const auto& [t, sel] : state_table) {
        if (static_cast<int>(t.size()) != n_gates) {
            problems.push_back("tuple " + tuple_text(t) + " has " + std::to_string(t.size()) + " entries, expected " +
                               std::to_string(n_gates));
            continue;
        }
        for (int v : t) {
            if (!gate_levels.count(v)) {
                problems.push_back("tuple " + tuple_text(t) + " uses undeclared level " + std::to_string(v));
                break;
            }
        }
        if (sel.kind == Selection::Kind::drain && (sel.drain < 0 || sel.drain >= n_drains)) {
            problems.push_back("tuple " + tuple_text(t) + " selects drain " + std::to_string(sel.drain + 1) +
                               " of " + std::to_string(n_drains));
        }
    }
    if (n_gates >= 1) {
        std::vector<std::string> missing;
        for (const auto& t : tuples()) {
            if (!state_table.count(t)) {
                missing.push_back(tuple_text(t));
            }
        }
        if (!missing.empty()) {
            std::string m = "state table is not total; missing";
            for (std::size_t i = 0; i < missing.size() && i < 8; ++i) {
                m += " " + missing[i];
            }
            if (missing.size() > 8) {
                m += " ... (" + std::to_string(missing.size()) + " total)";
            }
            problems.push_back(m);
        }
    }
    if (!problems.empty()) {
        std::string msg = "invalid MSET model:";
        for (const auto& p : problems) {
            msg += "\n  " + p;
        }
        throw ValidationError(msg);
    }
}

BehavioralMSET behavioral_from_statemap(const StateMap& map, const std::map<int, double>& gate_levels) {
    if (map.rows() == 0 || map.cols() == 0) {
        throw InvalidArgument("state map is empty");
    }
    if (gate_levels.empty()) {
        throw InvalidArgument("no gate levels given");
    }
    const double slack1 = 1e-9 + 1e-9 * std::abs(map.vg1_axis.front());
    const double slack2 = 1e-9 + 1e-9 * std::abs(map.vg2_axis.front());
    for (const auto& [level, v] : gate_levels) {
        const bool in1 = v >= map.vg1_axis.front() - slack1 && v <= map.vg1_axis.back() + slack1;
        const bool in2 = v >= map.vg2_axis.front() - slack2 && v <= map.vg2_axis.back() + slack2;
        if (!in1 || !in2) {
            throw InvalidArgument("gate level " + std::to_string(level) + " (" + format_number(v) +
                                  " V) lies outside the swept range [" + format_number(map.vg1_axis.front()) + ", " +
                                  format_number(map.vg1_axis.back()) + "] x [" + format_number(map.vg2_axis.front()) +
                                  ", " + format_number(map.vg2_axis.back()) + "] V");
        }
    }
    BehavioralMSET m;
    m.n_gates = 2;
    m.n_drains = static_cast<int>(map.drain_voltages.size());
    m.gate_levels = gate_levels;
    for (const auto& [l1, v1] : gate_levels) {
        const std::size_t i = nearest_index(map.vg1_axis, v1);
        for (const auto& [l2, v2] : gate_levels) {
            const std::size_t j = nearest_index(map.vg2_axis, v2);
            m.state_table[{l1, l2}] = selection_of(map.labels[i][j]);
        }
    }
    m.check();
    return m;
}

BehavioralMSET declared_mset(int n_gates, int n_drains, const std::map<GateTuple, Selection>& state_table,
                             const std::map<int, double>& gate_levels) {
    BehavioralMSET m;
    m.n_gates = n_gates;
    m.n_drains = n_drains;
    m.state_table = state_table;
    m.gate_levels = gate_levels;
    m.check();
    return m;
}

std::map<GateTuple, Selection> row_column_table() {
    // 0: first gate of the pair grounded, 1: second, -1: both grounded, -2: both depleting
    auto axis = [](int a, int b) {
        if (a == 0 && b == 1) {
            return 0;
        }
        if (a == 1 && b == 0) {
            return 1;
        }
        return a == 0 ? -1 : -2;
    };
    std::map<GateTuple, Selection> table;
    for (const auto& t : all_tuples({0, 1}, 4)) {
        const int col = axis(t[0], t[1]);
        const int row = axis(t[2], t[3]);
        if (col == -2 || row == -2) {
            table[t] = Selection::off();
        } else if (col == -1 || row == -1) {
            table[t] = Selection::undefined();
        } else {
            table[t] = Selection::of(col + 2 * row);
        }
    }
    return table;
}

namespace {

const char* type_name(NetElement::Type t) {
    switch (t) {
        case NetElement::Type::input:
            return "input";
        case NetElement::Type::constant:
            return "constant";
        case NetElement::Type::inverter:
            return "inverter";
        case NetElement::Type::mset:
            return "mset";
        case NetElement::Type::probe:
            break;
    }
    return "probe";
}

bool drives(const NetElement& e) {
    return e.type != NetElement::Type::probe;
}

std::vector<std::string> read_nets(const NetElement& e) {
    std::vector<std::string> nets = e.inputs;
    nets.insert(nets.end(), e.drains.begin(), e.drains.end());
    return nets;
}

}  // namespace

std::vector<std::size_t> LogicNet::evaluation_order() const {
    std::vector<std::string> problems;
    std::set<std::string> names;
    std::map<std::string, std::size_t> driver;
    for (std::size_t k = 0; k < elements.size(); ++k) {
        const NetElement& e = elements[k];
        const std::string who = std::string(type_name(e.type)) + " '" + e.name + "'";
        if (e.name.empty()) {
            problems.push_back("element " + std::to_string(k + 1) + " has no name");
        } else if (!names.insert(e.name).second) {
            problems.push_back("duplicate element name '" + e.name + "'");
        }
        if (drives(e)) {
            if (e.output.empty()) {
                problems.push_back(who + " has no output net");
            } else if (auto [it, fresh] = driver.emplace(e.output, k); !fresh) {
                problems.push_back("net '" + e.output + "' is driven by both '" + elements[it->second].name +
                                   "' and '" + e.name + "'");
            }
        }
        switch (e.type) {
            case NetElement::Type::input:
            case NetElement::Type::constant:
                if (!e.inputs.empty() || !e.drains.empty()) {
                    problems.push_back(who + " takes no inputs");
                }
                break;
            case NetElement::Type::inverter:
                if (e.inputs.size() != 1 || !e.drains.empty()) {
                    problems.push_back(who + " needs exactly one input");
                }
                if (e.radix < 2) {
                    problems.push_back(who + " radix must be at least 2");
                }
                break;
            case NetElement::Type::probe:
                if (e.inputs.size() != 1 || !e.drains.empty()) {
                    problems.push_back(who + " needs exactly one input");
                }
                break;
            case NetElement::Type::mset: {
                auto it = models.find(e.model);
                if (it == models.end()) {
                    problems.push_back(who + " uses unknown model '" + e.model + "'");
                    break;
                }
                if (static_cast<int>(e.inputs.size()) != it->second.n_gates) {
                    problems.push_back(who + " connects " + std::to_string(e.inputs.size()) + " gates; model '" +
                                       e.model + "' has " + std::to_string(it->second.n_gates));
                }
                if (static_cast<int>(e.drains.size()) != it->second.n_drains) {
                    problems.push_back(who + " connects " + std::to_string(e.drains.size()) + " drains; model '" +
                                       e.model + "' has " + std::to_string(it->second.n_drains));
                }
                break;
            }
        }
    }
    for (const auto& e : elements) {
        for (const auto& net : read_nets(e)) {
            if (!driver.count(net)) {
                problems.push_back(std::string(type_name(e.type)) + " '" + e.name + "' reads undriven net '" + net +
                                   "'");
            }
        }
    }
    if (!problems.empty()) {
        std::string msg = "invalid netlist:";
        for (const auto& p : problems) {
            msg += "\n  " + p;
        }
        throw ValidationError(msg);
    }

    std::vector<int> pending(elements.size(), 0);
    std::vector<std::vector<std::size_t>> readers(elements.size());
    for (std::size_t k = 0; k < elements.size(); ++k) {
        for (const auto& net : read_nets(elements[k])) {
            const std::size_t d = driver.at(net);
            readers[d].push_back(k);
            ++pending[k];
        }
    }
    std::deque<std::size_t> ready;
    for (std::size_t k = 0; k < elements.size(); ++k) {
        if (pending[k] == 0) {
            ready.push_back(k);
        }
    }
    std::vector<std::size_t> order;
    while (!ready.empty()) {
        const std::size_t k = ready.front();
        ready.pop_front();
        order.push_back(k);
        for (std::size_t r : readers[k]) {
            if (--pending[r] == 0) {
                ready.push_back(r);
            }
        }
    }
    if (order.size() != elements.size()) {
        std::string msg = "netlist has a combinational cycle through:";
        for (std::size_t k = 0; k < elements.size(); ++k) {
            if (pending[k] > 0) {
                msg += " " + elements[k].name;
            }
        }
        throw ValidationError(msg);
    }
    return order;
}

std::vector<std::string> LogicNet::input_names() const {
    std::vector<std::string> out;
    for (const auto& e : elements) {
        if (e.type == NetElement::Type::input) {
            out.push_back(e.name);
        }
    }
    return out;
}

std::vector<std::string> LogicNet::probe_names() const {
    std::vector<std::string> out;
    for (const auto& e : elements) {
        if (e.type == NetElement::Type::probe) {
            out.push_back(e.name);
        }
    }
    return out;
}

NetResult eval_net_detailed(const LogicNet& net, const std::map<std::string, int>& inputs) {
    const std::vector<std::size_t> order = net.evaluation_order();
    std::set<std::string> known;
    for (const auto& e : net.elements) {
        if (e.type == NetElement::Type::input) {
            known.insert(e.name);
            if (!inputs.count(e.name)) {
                throw InvalidArgument("input '" + e.name + "' has no value");
            }
        }
    }
    for (const auto& [name, v] : inputs) {
        if (!known.count(name)) {
            throw InvalidArgument("'" + name + "' is not an input of the netlist");
        }
    }

    std::map<std::string, Level> nets;
    NetResult result;
    for (std::size_t k : order) {
        const NetElement& e = net.elements[k];
        switch (e.type) {
            case NetElement::Type::input:
                nets[e.output] = Level::of(inputs.at(e.name));
                break;
            case NetElement::Type::constant:
                nets[e.output] = Level::of(e.value);
                break;
            case NetElement::Type::inverter: {
                const Level in = nets.at(e.inputs[0]);
                if (in.kind != Level::Kind::value || in.value < 0 || in.value >= e.radix) {
                    nets[e.output] = Level::undefined();
                } else {
                    nets[e.output] = Level::of(e.radix - 1 - in.value);
                }
                break;
            }
            case NetElement::Type::mset: {
                const BehavioralMSET& model = net.models.at(e.model);
                GateTuple gates;
                bool valid = true;
                for (const auto& g : e.inputs) {
                    const Level l = nets.at(g);
                    if (l.kind != Level::Kind::value || !model.gate_levels.count(l.value)) {
                        valid = false;
                        break;
                    }
                    gates.push_back(l.value);
                }
                const Selection sel = valid ? model.select(gates) : Selection::undefined();
                result.selections[e.name] = sel;
                if (sel.kind == Selection::Kind::drain) {
                    nets[e.output] = nets.at(e.drains[static_cast<std::size_t>(sel.drain)]);
                } else if (sel.kind == Selection::Kind::off) {
                    nets[e.output] = Level::hiz();
                } else {
                    nets[e.output] = Level::undefined();
                }
                break;
            }
            case NetElement::Type::probe:
                result.probes[e.name] = nets.at(e.inputs[0]);
                break;
        }
    }
    return result;
}

std::map<std::string, Level> eval_net(const LogicNet& net, const std::map<std::string, int>& inputs) {
    return eval_net_detailed(net, inputs).probes;
}

Level eval_ternary_mux(const BehavioralMSET& mset3, const GateTuple& gate_inputs,
                       const std::array<Level, 3>& drain_values) {
    if (mset3.n_drains != 3) {
        throw InvalidArgument("ternary multiplexer needs a 3-drain MSET, got " + std::to_string(mset3.n_drains) +
                              " drains");
    }
    const Selection sel = mset3.select(gate_inputs);
    switch (sel.kind) {
        case Selection::Kind::drain:
            return drain_values.at(static_cast<std::size_t>(sel.drain));
        case Selection::Kind::off:
            return Level::hiz();
        case Selection::Kind::undefined:
            break;
    }
    return Level::undefined();
}

ConcatReport check_concatenation(const std::vector<double>& stage_out_voltages,
                                 const std::vector<double>& next_gate_levels, double tolerance,
                                 const std::optional<LinearStage>& stage) {
    if (!(tolerance >= 0.0)) {
        throw InvalidArgument("concatenation tolerance must be non-negative");
    }
    ConcatReport report;
    const std::size_t n = std::max(stage_out_voltages.size(), next_gate_levels.size());
    for (std::size_t k = 0; k < n; ++k) {
        ConcatViolation v;
        v.index = k;
        if (k >= stage_out_voltages.size() || k >= next_gate_levels.size()) {
            v.kind = ConcatViolation::Kind::unpaired;
            v.message = k >= stage_out_voltages.size()
                            ? "gate " + std::to_string(k) + " has no driving output"
                            : "output " + std::to_string(k) + " drives no gate";
            report.violations.push_back(v);
            continue;
        }
        const double raw = stage_out_voltages[k];
        v.output = stage ? stage->gain * raw + stage->offset : raw;
        v.expected = next_gate_levels[k];
        if (v.output > 0.0) {
            v.kind = ConcatViolation::Kind::sign;
            v.message = "output " + std::to_string(k) + " is " + format_number(v.output) +
                        " V but gates need <= 0 V (expected " + format_number(v.expected) + " V)";
            report.violations.push_back(v);
        } else if (std::abs(v.output - v.expected) > tolerance) {
            v.kind = ConcatViolation::Kind::magnitude;
            v.message = "output " + std::to_string(k) + " is " + format_number(v.output) + " V, expected " +
                        format_number(v.expected) + " V within " + format_number(tolerance) + " V";
            report.violations.push_back(v);
        }
    }
    return report;
}

CostComparison cmos_cost_compare() {
    CostComparison c;
    c.mset_solution = {1, 4};
    c.cmos_solution = {0, 16};
    return c;
}

TruthTable truth_table(const LogicNet& net, const std::vector<std::pair<std::string, std::vector<int>>>& enumerate,
                       const std::map<std::string, int>& fixed) {
    TruthTable table;
    std::vector<std::string> msets;
    for (const auto& e : net.elements) {
        if (e.type == NetElement::Type::mset) {
            msets.push_back(e.name);
        }
    }
    for (const auto& [name, values] : enumerate) {
        if (values.empty()) {
            throw InvalidArgument("input '" + name + "' has no values to enumerate");
        }
        if (fixed.count(name)) {
            throw InvalidArgument("input '" + name + "' is both enumerated and fixed");
        }
        table.columns.push_back(name);
    }
    for (const auto& p : net.probe_names()) {
        table.columns.push_back(p);
    }
    for (const auto& m : msets) {
        table.columns.push_back(m + "_selected");
    }
    std::vector<std::size_t> idx(enumerate.size(), 0);
    while (true) {
        std::map<std::string, int> in = fixed;
        std::vector<std::string> row;
        for (std::size_t k = 0; k < enumerate.size(); ++k) {
            const int v = enumerate[k].second[idx[k]];
            in[enumerate[k].first] = v;
            row.push_back(std::to_string(v));
        }
        const NetResult r = eval_net_detailed(net, in);
        for (const auto& p : net.probe_names()) {
            row.push_back(to_string(r.probes.at(p)));
        }
        for (const auto& m : msets) {
            row.push_back(to_string(r.selections.at(m)));
        }
        table.rows.push_back(std::move(row));
        std::size_t k = enumerate.size();
        while (k > 0 && ++idx[k - 1] == enumerate[k - 1].second.size()) {
            idx[k - 1] = 0;
            --k;
        }
        if (k == 0) {
            return table;
        }
    }
}

void write_truth_table_csv(std::ostream& os, const TruthTable& table) {
    for (std::size_t k = 0; k < table.columns.size(); ++k) {
        os << (k ? "," : "") << table.columns[k];
    }
    os << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            os << (k ? "," : "") << row[k];
        }
        os << '\n';
    }
}

}  // namespace mset
