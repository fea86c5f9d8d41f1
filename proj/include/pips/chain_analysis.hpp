#pragma once

#include "pips/finite_horizon.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <limits>

namespace pips {

/// One action per state, applied at every time step.
using StationaryPolicy = std::vector<Action>;

inline void require_admissible(const MdpModel& model, const StationaryPolicy& phi) {
    if (phi.size() != model.num_states())
        throw PreconditionError("stationary policy has the wrong number of states");
    for (State x = 0; x < phi.size(); ++x) require_admissible(model, x, phi[x]);
}

/**
 * Communicating classes of the chain induced by a stationary policy.
 * Classes are ordered by their smallest member; members are ascending.
 */
struct ClassPartition {
    std::vector<std::vector<State>> classes;
    /// recurrent[c] is true iff class c has no edge leaving it.
    std::vector<bool> recurrent;
    /// class_of[x] indexes `classes`.
    std::vector<std::size_t> class_of;

    std::size_t size() const { return classes.size(); }
    const std::vector<State>& class_containing(State x) const { return classes[class_of[x]]; }
};

namespace detail {

/// Iterative Tarjan over adjacency lists. Returns a component id per node.
inline std::vector<std::size_t> tarjan_components(const std::vector<std::vector<State>>& adj,
                                                  std::size_t& num_components) {
    constexpr std::size_t kUnvisited = std::numeric_limits<std::size_t>::max();
    const std::size_t n = adj.size();
    std::vector<std::size_t> index(n, kUnvisited), low(n, 0), comp(n, kUnvisited);
    std::vector<bool> on_stack(n, false);
    std::vector<State> stack;
    std::vector<std::pair<State, std::size_t>> call; // node, next edge
    std::size_t counter = 0;
    num_components = 0;

    for (State root = 0; root < n; ++root) {
        if (index[root] != kUnvisited) continue;
        call.push_back({root, 0});
        while (!call.empty()) {
            auto& [v, edge] = call.back();
            if (edge == 0 && index[v] == kUnvisited) {
                index[v] = low[v] = counter++;
                stack.push_back(v);
                on_stack[v] = true;
            }
            if (edge < adj[v].size()) {
                const State w = adj[v][edge++];
                if (index[w] == kUnvisited) {
                    call.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            if (low[v] == index[v]) {
                State w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp[w] = num_components;
                } while (w != v);
                ++num_components;
            }
            const State done = v;
            call.pop_back();
            if (!call.empty()) {
                const State parent = call.back().first;
                low[parent] = std::min(low[parent], low[done]);
            }
        }
    }
    return comp;
}

} // namespace detail

/// Strongly connected components of x -> y iff P[x][phi(x)][y] > 0.
inline ClassPartition communicating_classes(const MdpModel& model, const StationaryPolicy& phi) {
    require_admissible(model, phi);
    const std::size_t n = model.num_states();
    std::vector<std::vector<State>> adj(n);
    for (State x = 0; x < n; ++x) {
        const auto row = model.row(x, phi[x]);
        for (State y = 0; y < n; ++y)
            if (row[y] > 0.0) adj[x].push_back(y);
    }
    std::size_t count = 0;
    const auto comp = detail::tarjan_components(adj, count);

    // Renumber components by smallest member.
    std::vector<std::size_t> remap(count, std::numeric_limits<std::size_t>::max());
    std::size_t next = 0;
    for (State x = 0; x < n; ++x)
        if (remap[comp[x]] == std::numeric_limits<std::size_t>::max()) remap[comp[x]] = next++;

    ClassPartition part;
    part.classes.resize(count);
    part.recurrent.assign(count, true);
    part.class_of.resize(n);
    for (State x = 0; x < n; ++x) {
        part.class_of[x] = remap[comp[x]];
        part.classes[part.class_of[x]].push_back(x);
    }
    for (State x = 0; x < n; ++x)
        for (State y : adj[x])
            if (part.class_of[x] != part.class_of[y]) part.recurrent[part.class_of[x]] = false;
    return part;
}

enum class CommunicatingMode { kSufficient, kExhaustive };
enum class Verdict { kYes, kNo, kUnknown };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::kYes: return "yes";
    case Verdict::kNo: return "no";
    case Verdict::kUnknown: return "unknown";
    }
    return "unknown";
}

struct CommunicatingVerdict {
    Verdict verdict = Verdict::kUnknown;
    /// For kNo: a stationary policy whose chain has more than one class.
    std::optional<StationaryPolicy> witness;
};

inline constexpr std::size_t kDefaultEnumerationCap = 1'000'000;

/**
 * Whether every stationary policy induces a single communicating class.
 *
 * Sufficient mode answers yes when every transition entry is positive and
 * unknown otherwise. Exhaustive mode enumerates all stationary policies
 * (state 0 varies fastest) and reports the first counterexample; it refuses
 * models with more than `cap` policies.
 */
inline CommunicatingVerdict is_mdp_communicating(const MdpModel& model, CommunicatingMode mode,
                                                 std::size_t cap = kDefaultEnumerationCap) {
    const std::size_t n = model.num_states();
    if (mode == CommunicatingMode::kSufficient) {
        for (State x = 0; x < n; ++x)
            for (Action a = 0; a < model.num_actions(x); ++a)
                for (double p : model.row(x, a))
                    if (!(p > 0.0)) return {Verdict::kUnknown, std::nullopt};
        return {Verdict::kYes, std::nullopt};
    }

    std::size_t total = 1;
    for (State x = 0; x < n; ++x) {
        if (total > cap / model.num_actions(x))
            throw PreconditionError(
                "exhaustive check exceeds the enumeration cap of " + std::to_string(cap) +
                " stationary policies; use the sufficient mode instead");
        total *= model.num_actions(x);
    }
    StationaryPolicy phi(n, 0);
    for (std::size_t i = 0; i < total; ++i) {
        if (communicating_classes(model, phi).size() != 1) return {Verdict::kNo, phi};
        for (State x = 0; x < n; ++x) {
            if (++phi[x] < model.num_actions(x)) break;
            phi[x] = 0;
        }
    }
    return {Verdict::kYes, std::nullopt};
}

// ---------------------------------------------------------------------------
// Infinite horizon
// ---------------------------------------------------------------------------

/// Largest |V(x) - R(x,phi(x)) - gamma * (P V)(x)|.
inline double bellman_residual(const MdpModel& model, const StationaryPolicy& phi,
                               std::span<const double> v) {
    double r = 0.0;
    for (State x = 0; x < model.num_states(); ++x)
        r = std::max(r, std::abs(v[x] - q_value(model, x, phi[x], v)));
    return r;
}

/// Largest |V - T(V)|.
inline double optimality_residual(const MdpModel& model, std::span<const double> v) {
    const auto backup = bellman_backup(model, v);
    double r = 0.0;
    for (State x = 0; x < model.num_states(); ++x) r = std::max(r, std::abs(v[x] - backup.values[x]));
    return r;
}

/**
 * Value of [phi] over the infinite horizon: solves (I - gamma P_phi) V = R_phi
 * by LU with partial pivoting, then refines until the residual is below 1e-10.
 */
inline ValueRow evaluate_stationary_infinite(const MdpModel& model, const StationaryPolicy& phi) {
    require_admissible(model, phi);
    const auto n = static_cast<Eigen::Index>(model.num_states());
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index x = 0; x < n; ++x) {
        const auto s = static_cast<State>(x);
        rhs(x) = model.reward(s, phi[s]);
        const auto row = model.row(s, phi[s]);
        for (Eigen::Index y = 0; y < n; ++y) system(x, y) -= model.gamma() * row[static_cast<State>(y)];
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    Eigen::VectorXd v = lu.solve(rhs);
    for (int refine = 0; refine < 4; ++refine) {
        const Eigen::VectorXd resid = rhs - system * v;
        if (resid.lpNorm<Eigen::Infinity>() <= 1e-12) break;
        v += lu.solve(resid);
    }
    return ValueRow(v.data(), v.data() + n);
}

struct InfiniteSolution {
    ValueRow values;
    StationaryPolicy policy;
    std::size_t iterations = 0;
};

/**
 * Howard policy iteration. Improvement keeps the current action unless
 * another is better by more than kStrictSlack; the returned policy is the
 * lowest-index greedy policy of the final values.
 */
inline InfiniteSolution solve_infinite_optimal(const MdpModel& model, double tol = 1e-9) {
    if (!(tol > 0.0)) throw PreconditionError("solve_infinite_optimal needs tol > 0");
    // Howard iteration stops at an exact fixed point; tol only bounds the
    // residual the caller may observe, which the linear solve keeps far below.
    const std::size_t n = model.num_states();
    InfiniteSolution sol{{}, StationaryPolicy(n, 0), 0};
    const std::size_t max_iterations = 10000;
    for (;;) {
        sol.values = evaluate_stationary_infinite(model, sol.policy);
        bool changed = false;
        for (State x = 0; x < n; ++x) {
            double best = q_value(model, x, sol.policy[x], sol.values);
            for (Action a = 0; a < model.num_actions(x); ++a) {
                const double q = q_value(model, x, a, sol.values);
                if (q > best + kStrictSlack) {
                    best = q;
                    sol.policy[x] = a;
                    changed = true;
                }
            }
        }
        ++sol.iterations;
        if (!changed || sol.iterations >= max_iterations) break;
    }
    // Clean up to the lowest-index action within slack.
    for (State x = 0; x < n; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        for (Action a = 0; a < model.num_actions(x); ++a)
            best = std::max(best, q_value(model, x, a, sol.values));
        for (Action a = 0; a < model.num_actions(x); ++a) {
            if (q_value(model, x, a, sol.values) >= best - kStrictSlack) {
                sol.policy[x] = a;
                break;
            }
        }
    }
    return sol;
}

struct HorizonError {
    std::size_t horizon;
    double error;
};

/**
 * For each H: solve the H-step problem from `terminal` by backward
 * induction, roll its top level as a stationary policy, and measure
 * ||V^[top level] - V*||_inf over the infinite horizon.
 */
inline std::vector<HorizonError> rolling_horizon_error(const MdpModel& model,
                                                       std::span<const std::size_t> horizons,
                                                       const std::optional<ValueRow>& terminal = {}) {
    if (horizons.empty()) throw PreconditionError("rolling_horizon_error needs horizons");
    for (std::size_t i = 0; i < horizons.size(); ++i) {
        if (horizons[i] == 0) throw PreconditionError("horizons must be at least 1");
        if (i > 0 && horizons[i] <= horizons[i - 1])
            throw PreconditionError("horizons must be strictly increasing");
    }
    const auto optimal = solve_infinite_optimal(model);
    std::vector<HorizonError> out;
    for (std::size_t h : horizons) {
        const auto sol = backward_induction(model, h, terminal);
        const auto v = evaluate_stationary_infinite(model, sol.policy.first_entry());
        double err = 0.0;
        for (State x = 0; x < model.num_states(); ++x)
            err = std::max(err, std::abs(v[x] - optimal.values[x]));
        out.push_back({h, err});
    }
    return out;
}

} // namespace pips
