#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>

#include "json.hpp"

#include "gridse/error.hpp"
#include "gridse/network.hpp"
#include "gridse/units.hpp"

namespace gridse {

using nlohmann::json;

CaseFormat case_format_for(const std::string& path) {
    const auto dot = path.rfind('.');
    if (dot != std::string::npos && path.substr(dot) == ".json") return CaseFormat::native_json;
    return CaseFormat::matpower_text;
}

NetworkGraph import_case(const std::string& path, CaseFormat format) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open case file '" + path + "'");
    NetworkGraph graph =
        format == CaseFormat::native_json ? read_case_json(in) : read_case_matpower(in);
    if (!graph.is_connected()) throw InputError("case '" + path + "' is not connected");
    return graph;
}

namespace {

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw InputError(where + ": missing '" + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw InputError(where + ": bad value for '" + key + "'");
    }
}

template <typename T>
T optional_value(const json& obj, const char* key, T fallback) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return fallback;
    return it->get<T>();
}

}  // namespace

NetworkGraph read_case_json(std::istream& in) {
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw InputError(std::string("case JSON parse error: ") + e.what());
    }
    if (!doc.is_object()) throw InputError("case JSON must be an object");

    std::vector<Bus> buses;
    for (const json& jb : required<json>(doc, "buses", "case")) {
        Bus b;
        b.id = required<int>(jb, "id", "bus");
        const std::string where = "bus " + std::to_string(b.id);
        b.kind = bus_kind_from_string(required<std::string>(jb, "kind", where));
        b.shunt_g = optional_value(jb, "shunt_g", 0.0);
        b.shunt_b = optional_value(jb, "shunt_b", 0.0);
        if (jb.contains("vmag") && !jb["vmag"].is_null()) b.true_vmag = jb["vmag"].get<double>();
        if (jb.contains("angle_deg") && !jb["angle_deg"].is_null()) {
            b.true_angle = deg_to_rad(jb["angle_deg"].get<double>());
        }
        b.p_sched = optional_value(jb, "p_sched", 0.0);
        b.q_sched = optional_value(jb, "q_sched", 0.0);
        b.v_set = optional_value(jb, "v_set", 1.0);
        buses.push_back(b);
    }
    std::vector<Branch> branches;
    for (const json& jr : required<json>(doc, "branches", "case")) {
        Branch br;
        br.from_bus = required<int>(jr, "from", "branch");
        br.to_bus = required<int>(jr, "to", "branch");
        const std::string where =
            "branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
        br.r = required<double>(jr, "r", where);
        br.x = required<double>(jr, "x", where);
        br.b_charging = optional_value(jr, "b", 0.0);
        br.tap_ratio = optional_value(jr, "tap", 1.0);
        br.phase_shift = deg_to_rad(optional_value(jr, "shift_deg", 0.0));
        br.in_service = optional_value(jr, "status", 1) != 0;
        branches.push_back(br);
    }
    const int slack = required<int>(doc, "slack", "case");
    const double base = optional_value(doc, "base_mva", 100.0);
    return NetworkGraph(std::move(buses), std::move(branches), slack, base);
}

void write_case_json(const NetworkGraph& graph, std::ostream& out) {
    json doc;
    doc["base_mva"] = graph.base_mva();
    doc["slack"] = graph.slack_bus();
    json buses = json::array();
    for (const Bus& b : graph.buses()) {
        json jb{{"id", b.id},           {"kind", to_string(b.kind)},
                {"shunt_g", b.shunt_g}, {"shunt_b", b.shunt_b},
                {"p_sched", b.p_sched}, {"q_sched", b.q_sched},
                {"v_set", b.v_set}};
        if (b.true_vmag) jb["vmag"] = *b.true_vmag;
        if (b.true_angle) jb["angle_deg"] = rad_to_deg_exact(*b.true_angle);
        buses.push_back(std::move(jb));
    }
    doc["buses"] = std::move(buses);
    json branches = json::array();
    for (const Branch& br : graph.branches()) {
        branches.push_back(json{{"from", br.from_bus},
                                {"to", br.to_bus},
                                {"r", br.r},
                                {"x", br.x},
                                {"b", br.b_charging},
                                {"tap", br.tap_ratio},
                                {"shift_deg", rad_to_deg_exact(br.phase_shift)},
                                {"status", br.in_service ? 1 : 0}});
    }
    doc["branches"] = std::move(branches);
    out << doc.dump(2) << '\n';
}

void export_case(const NetworkGraph& graph, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write case file '" + path + "'");
    write_case_json(graph, out);
}

namespace {

// Splits "mpc.<name> = [ ... ];" blocks into numeric rows.
struct MatpowerTables {
    std::optional<double> base_mva;
    std::map<std::string, std::vector<std::vector<double>>> tables;
};

MatpowerTables parse_matpower(std::istream& in) {
    MatpowerTables out;
    std::string line;
    std::string open_table;
    std::vector<double> row;
    int line_no = 0;

    auto flush_row = [&] {
        if (!row.empty()) out.tables[open_table].push_back(row);
        row.clear();
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (const auto pct = line.find('%'); pct != std::string::npos) line.erase(pct);
        std::string body = line;
        if (open_table.empty()) {
            const auto key = body.find("mpc.");
            if (key == std::string::npos) continue;
            const auto eq = body.find('=', key);
            if (eq == std::string::npos) continue;
            std::string name = body.substr(key + 4, eq - key - 4);
            name.erase(name.find_last_not_of(" \t") + 1);
            std::string rhs = body.substr(eq + 1);
            const auto bracket = rhs.find('[');
            if (bracket == std::string::npos) {
                if (name == "baseMVA") {
                    try {
                        out.base_mva = std::stod(rhs);
                    } catch (const std::exception&) {
                        throw InputError("line " + std::to_string(line_no) + ": bad baseMVA");
                    }
                }
                continue;
            }
            open_table = name;
            out.tables[open_table];
            body = rhs.substr(bracket + 1);
        }
        for (std::size_t pos = 0; pos < body.size();) {
            const char c = body[pos];
            if (c == ']') {
                flush_row();
                open_table.clear();
                break;
            }
            if (c == ';') {
                flush_row();
                ++pos;
                continue;
            }
            if (c == ' ' || c == '\t' || c == ',' || c == '\r') {
                ++pos;
                continue;
            }
            std::size_t used = 0;
            try {
                row.push_back(std::stod(body.substr(pos), &used));
            } catch (const std::exception&) {
                throw InputError("line " + std::to_string(line_no) + ": unexpected text in table '" +
                                 open_table + "'");
            }
            pos += used;
        }
        if (!open_table.empty()) flush_row();
    }
    if (!open_table.empty()) throw InputError("unterminated table '" + open_table + "'");
    return out;
}

}  // namespace

NetworkGraph read_case_matpower(std::istream& in) {
    const MatpowerTables t = parse_matpower(in);
    const auto bus_it = t.tables.find("bus");
    const auto branch_it = t.tables.find("branch");
    if (bus_it == t.tables.end() || bus_it->second.empty()) {
        throw InputError("case file has no bus table");
    }
    if (branch_it == t.tables.end()) throw InputError("case file has no branch table");
    const double base = t.base_mva.value_or(100.0);

    std::vector<Bus> buses;
    std::map<int, std::size_t> position;
    std::optional<int> slack;
    for (const auto& r : bus_it->second) {
        if (r.size() < 9) throw InputError("bus row with fewer than 9 columns");
        Bus b;
        b.id = static_cast<int>(r[0]);
        const int type = static_cast<int>(r[1]);
        if (type == 4) continue;  // isolated
        b.kind = type == 3 ? BusKind::slack : type == 2 ? BusKind::generator : BusKind::load;
        if (type == 3) {
            if (slack) throw InputError("case has more than one slack bus");
            slack = b.id;
        }
        b.p_sched = -r[2] / base;
        b.q_sched = -r[3] / base;
        b.shunt_g = r[4] / base;
        b.shunt_b = r[5] / base;
        b.true_vmag = r[7];
        b.true_angle = deg_to_rad(r[8]);
        b.v_set = r[7];
        position[b.id] = buses.size();
        buses.push_back(b);
    }
    if (!slack) throw InputError("case has no slack bus");

    if (const auto gen_it = t.tables.find("gen"); gen_it != t.tables.end()) {
        for (const auto& r : gen_it->second) {
            if (r.size() < 8) throw InputError("gen row with fewer than 8 columns");
            if (r[7] <= 0.0) continue;
            const auto p = position.find(static_cast<int>(r[0]));
            if (p == position.end()) throw InputError("generator at unknown bus");
            Bus& b = buses[p->second];
            b.p_sched += r[1] / base;
            b.q_sched += r[2] / base;
            b.v_set = r[5];
        }
    }

    std::vector<Branch> branches;
    for (const auto& r : branch_it->second) {
        if (r.size() < 11) throw InputError("branch row with fewer than 11 columns");
        Branch br;
        br.from_bus = static_cast<int>(r[0]);
        br.to_bus = static_cast<int>(r[1]);
        br.r = r[2];
        br.x = r[3];
        br.b_charging = r[4];
        br.tap_ratio = r[8] == 0.0 ? 1.0 : r[8];
        br.phase_shift = deg_to_rad(r[9]);
        br.in_service = r[10] != 0.0;
        branches.push_back(br);
    }
    return NetworkGraph(std::move(buses), std::move(branches), *slack, base);
}

}  // namespace gridse
