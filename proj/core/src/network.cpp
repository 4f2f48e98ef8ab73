#include "gridse/network.hpp"

#include <algorithm>
#include <numbers>
#include <queue>
#include <unordered_set>

#include "gridse/error.hpp"
#include "gridse/parallel.hpp"

namespace gridse {

const char* to_string(BusKind kind) {
    switch (kind) {
        case BusKind::slack: return "slack";
        case BusKind::generator: return "generator";
        case BusKind::load: return "load";
    }
    return "load";
}

BusKind bus_kind_from_string(const std::string& text) {
    if (text == "slack") return BusKind::slack;
    if (text == "generator") return BusKind::generator;
    if (text == "load") return BusKind::load;
    throw InputError("unknown bus kind '" + text + "'");
}

BranchAdmittance branch_admittance(const Branch& branch) {
    if (branch.x == 0.0) {
        throw DegenerateBranchError("branch " + std::to_string(branch.from_bus) + "-" +
                                    std::to_string(branch.to_bus) + " has zero reactance");
    }
    const Complex series = 1.0 / Complex(branch.r, branch.x);
    const Complex charging(0.0, branch.b_charging / 2.0);
    const Complex tap = std::polar(branch.tap_ratio, branch.phase_shift);
    BranchAdmittance y;
    y.tt = series + charging;
    y.ff = y.tt / (branch.tap_ratio * branch.tap_ratio);
    y.ft = -series / std::conj(tap);
    y.tf = -series / tap;
    return y;
}

NetworkGraph::NetworkGraph(std::vector<Bus> buses, std::vector<Branch> branches, int slack_bus,
                           double base_mva)
    : buses_(std::move(buses)),
      branches_(std::move(branches)),
      adjacency_(buses_.size()),
      slack_bus_(slack_bus),
      base_mva_(base_mva) {
    index_.reserve(buses_.size());
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        if (!index_.emplace(buses_[i].id, i).second) {
            throw InputError("duplicate bus id " + std::to_string(buses_[i].id));
        }
        if (buses_[i].true_vmag && *buses_[i].true_vmag <= 0.0) {
            throw InputError("bus " + std::to_string(buses_[i].id) + " has non-positive voltage");
        }
    }
    const auto slack = index_.find(slack_bus);
    if (slack == index_.end()) {
        throw InputError("slack bus " + std::to_string(slack_bus) + " is not in the network");
    }
    slack_index_ = slack->second;

    for (std::size_t k = 0; k < branches_.size(); ++k) {
        const Branch& br = branches_[k];
        const auto from = index_.find(br.from_bus);
        const auto to = index_.find(br.to_bus);
        if (from == index_.end() || to == index_.end()) {
            throw InputError("branch " + std::to_string(br.from_bus) + "-" +
                             std::to_string(br.to_bus) + " has a dangling endpoint");
        }
        if (br.from_bus == br.to_bus) {
            throw InputError("branch at bus " + std::to_string(br.from_bus) + " is a self loop");
        }
        if (!(br.tap_ratio > 0.0)) {
            throw InputError("branch " + std::to_string(br.from_bus) + "-" +
                             std::to_string(br.to_bus) + " has a non-positive tap ratio");
        }
        if (!br.in_service) continue;
        adjacency_[from->second].push_back(k);
        adjacency_[to->second].push_back(k);
    }
}

std::size_t NetworkGraph::index_of(int bus_id) const {
    const auto it = index_.find(bus_id);
    if (it == index_.end()) throw InputError("unknown bus id " + std::to_string(bus_id));
    return it->second;
}

std::vector<std::size_t> NetworkGraph::neighbours(std::size_t bus_index) const {
    std::vector<std::size_t> out;
    const int id = buses_[bus_index].id;
    for (const std::size_t k : adjacency_[bus_index]) {
        const Branch& br = branches_[k];
        out.push_back(index_.at(br.from_bus == id ? br.to_bus : br.from_bus));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<std::size_t> NetworkGraph::branches_between(int a, int b) const {
    std::vector<std::size_t> out;
    const auto it = index_.find(a);
    if (it == index_.end()) return out;
    for (const std::size_t k : adjacency_[it->second]) {
        const Branch& br = branches_[k];
        if ((br.from_bus == a && br.to_bus == b) || (br.from_bus == b && br.to_bus == a)) {
            out.push_back(k);
        }
    }
    return out;
}

bool NetworkGraph::is_connected() const {
    if (buses_.empty()) return true;
    std::vector<char> seen(buses_.size(), 0);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = 1;
    std::size_t count = 1;
    while (!frontier.empty()) {
        const std::size_t i = frontier.front();
        frontier.pop();
        for (const std::size_t j : neighbours(i)) {
            if (!seen[j]) {
                seen[j] = 1;
                ++count;
                frontier.push(j);
            }
        }
    }
    return count == buses_.size();
}

bool NetworkGraph::has_truth() const {
    return !buses_.empty() && std::all_of(buses_.begin(), buses_.end(), [](const Bus& b) {
        return b.true_vmag.has_value() && b.true_angle.has_value();
    });
}

Complex NodalAdmittance::at(int from_id, int to_id) const {
    if (from_id == to_id) {
        const auto it = std::find(bus_ids.begin(), bus_ids.end(), from_id);
        return it == bus_ids.end() ? Complex{} : diagonal[static_cast<std::size_t>(it - bus_ids.begin())];
    }
    const auto it = off_diagonal.find({from_id, to_id});
    return it == off_diagonal.end() ? Complex{} : it->second;
}

Complex diagonal_admittance(const NetworkGraph& graph, std::size_t bus_index) {
    const Bus& bus = graph.buses()[bus_index];
    Complex y(bus.shunt_g, bus.shunt_b);
    for (const std::size_t k : graph.incident(bus_index)) {
        const Branch& br = graph.branches()[k];
        const BranchAdmittance ya = branch_admittance(br);
        y += br.from_bus == bus.id ? ya.ff : ya.tt;
    }
    return y;
}

NodalAdmittance build_admittance(const NetworkGraph& graph, ThreadPool* pool) {
    const std::size_t n = graph.bus_count();
    NodalAdmittance y;
    y.bus_ids.resize(n);
    y.diagonal.resize(n);
    // Row i of the off-diagonal part, computed at bus i only.
    std::vector<std::vector<std::pair<int, Complex>>> rows(n);
    for_each_chunk(pool, n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const int id = graph.buses()[i].id;
            y.bus_ids[i] = id;
            y.diagonal[i] = diagonal_admittance(graph, i);
            for (const std::size_t k : graph.incident(i)) {
                const Branch& br = graph.branches()[k];
                const BranchAdmittance ya = branch_admittance(br);
                if (br.from_bus == id) {
                    rows[i].emplace_back(br.to_bus, ya.ft);
                } else {
                    rows[i].emplace_back(br.from_bus, ya.tf);
                }
            }
        }
    });
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& [other, value] : rows[i]) y.off_diagonal[{y.bus_ids[i], other}] += value;
    }
    return y;
}

}  // namespace gridse
