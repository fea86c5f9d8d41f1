#pragma once

#include "pips/mdp.hpp"

#include <compare>
#include <functional>

namespace pips {

/**
 * H-length policy stored by remaining horizon.
 *
 * Level j (1..H) is the mapping applied when j decisions remain, so level H
 * is the mapping used at the current time step by a rolling controller and
 * level 1 is the last decision before the terminal value. The x-coordinate
 * of the policy is the column (at(1,x), ..., at(H,x)).
 */
class FiniteHorizonPolicy {
public:
    FiniteHorizonPolicy() = default;

    FiniteHorizonPolicy(std::size_t horizon, std::size_t num_states, Action fill = 0)
        : levels_(horizon, std::vector<Action>(num_states, fill)) {
        if (horizon == 0) throw PreconditionError("policy horizon must be at least 1");
    }

    /// levels[j-1][x] is the action at remaining horizon j.
    explicit FiniteHorizonPolicy(std::vector<std::vector<Action>> levels)
        : levels_(std::move(levels)) {
        if (levels_.empty()) throw PreconditionError("policy horizon must be at least 1");
        for (const auto& l : levels_)
            if (l.size() != levels_.front().size())
                throw PreconditionError("policy levels have different state counts");
    }

    std::size_t horizon() const { return levels_.size(); }
    std::size_t num_states() const { return levels_.empty() ? 0 : levels_.front().size(); }

    Action at(std::size_t level, State x) const { return levels_[level - 1][x]; }
    void set(std::size_t level, State x, Action a) { levels_[level - 1][x] = a; }

    const std::vector<Action>& level(std::size_t j) const { return levels_[j - 1]; }
    /// Mapping used by the rolling controller now (remaining horizon H).
    const std::vector<Action>& first_entry() const { return levels_.back(); }

    std::vector<Action> column(State x) const {
        std::vector<Action> col(horizon());
        for (std::size_t j = 1; j <= horizon(); ++j) col[j - 1] = at(j, x);
        return col;
    }

    void set_column(State x, std::span<const Action> col) {
        if (col.size() != horizon()) throw PreconditionError("column length must equal horizon");
        for (std::size_t j = 1; j <= horizon(); ++j) set(j, x, col[j - 1]);
    }

    const std::vector<std::vector<Action>>& levels() const { return levels_; }

    bool operator==(const FiniteHorizonPolicy&) const = default;

private:
    std::vector<std::vector<Action>> levels_;
};

/// Hash over all entries; used to detect revisited policies.
struct PolicyHash {
    std::size_t operator()(const FiniteHorizonPolicy& p) const {
        std::uint64_t h = 0x84222325CBF29CE4ULL;
        for (const auto& l : p.levels())
            for (Action a : l) h = RngStream::splitmix64(h ^ static_cast<std::uint64_t>(a));
        return static_cast<std::size_t>(h);
    }
};

inline bool is_admissible(const MdpModel& model, const FiniteHorizonPolicy& policy) {
    if (policy.num_states() != model.num_states()) return false;
    for (std::size_t j = 1; j <= policy.horizon(); ++j)
        for (State x = 0; x < model.num_states(); ++x)
            if (!model.admissible(x, policy.at(j, x))) return false;
    return true;
}

inline void require_admissible(const MdpModel& model, const FiniteHorizonPolicy& policy) {
    if (policy.num_states() != model.num_states())
        throw PreconditionError("policy state count does not match the model");
    for (std::size_t j = 1; j <= policy.horizon(); ++j)
        for (State x = 0; x < model.num_states(); ++x)
            if (!model.admissible(x, policy.at(j, x)))
                throw PreconditionError("policy entry at level " + std::to_string(j) +
                                        ", state " + std::to_string(x) +
                                        " is not admissible");
}

/// Uniformly random admissible policy.
inline FiniteHorizonPolicy random_policy(const MdpModel& model, std::size_t horizon,
                                         RngStream& rng) {
    FiniteHorizonPolicy p(horizon, model.num_states());
    for (std::size_t j = 1; j <= horizon; ++j)
        for (State x = 0; x < model.num_states(); ++x) p.set(j, x, rng.below(model.num_actions(x)));
    return p;
}

/**
 * Table of h-horizon values V[h][x], h = 0..H. Row 0 is the terminal row.
 */
class ValueTable {
public:
    ValueTable() = default;
    ValueTable(std::size_t horizon, std::size_t num_states)
        : rows_(horizon + 1, ValueRow(num_states, 0.0)) {}

    std::size_t horizon() const { return rows_.empty() ? 0 : rows_.size() - 1; }
    std::size_t num_states() const { return rows_.empty() ? 0 : rows_.front().size(); }

    const ValueRow& row(std::size_t h) const { return rows_[h]; }
    ValueRow& row(std::size_t h) { return rows_[h]; }
    double at(std::size_t h, State x) const { return rows_[h][x]; }
    const ValueRow& terminal() const { return rows_.front(); }
    const ValueRow& top() const { return rows_.back(); }
    const std::vector<ValueRow>& rows() const { return rows_; }

    bool operator==(const ValueTable&) const = default;

private:
    std::vector<ValueRow> rows_;
};

// ---------------------------------------------------------------------------
// Evaluation and backups
// ---------------------------------------------------------------------------

/// R(x,a) + gamma * sum_y P[x][a][y] * continuation[y].
inline double q_value(const MdpModel& model, State x, Action a,
                      std::span<const double> continuation) {
    require_admissible(model, x, a);
    const auto row = model.row(x, a);
    double expected = 0.0;
    for (State y = 0; y < row.size(); ++y) expected += row[y] * continuation[y];
    return model.reward(x, a) + model.gamma() * expected;
}

namespace detail {

inline ValueRow resolve_terminal(const MdpModel& model, const std::optional<ValueRow>& terminal) {
    if (!terminal) return ValueRow(model.num_states(), 0.0);
    if (terminal->size() != model.num_states())
        throw PreconditionError("terminal row has " + std::to_string(terminal->size()) +
                                " entries, model has " + std::to_string(model.num_states()) +
                                " states");
    return *terminal;
}

} // namespace detail

/**
 * Exact values of `policy` for h = 0..levels (levels defaults to the policy
 * horizon): V[h](x) = R(x, at(h,x)) + gamma * sum_y P V[h-1](y).
 * Requesting more levels than the policy holds is a horizon mismatch.
 */
inline ValueTable evaluate_policy(const MdpModel& model, const FiniteHorizonPolicy& policy,
                                  const std::optional<ValueRow>& terminal = std::nullopt,
                                  std::optional<std::size_t> levels = std::nullopt) {
    const std::size_t depth = levels.value_or(policy.horizon());
    if (depth > policy.horizon())
        throw PreconditionError("horizon mismatch: requested " + std::to_string(depth) +
                                " levels from a policy of horizon " +
                                std::to_string(policy.horizon()));
    require_admissible(model, policy);
    ValueTable table(depth, model.num_states());
    table.row(0) = detail::resolve_terminal(model, terminal);
    for (std::size_t h = 1; h <= depth; ++h)
        for (State x = 0; x < model.num_states(); ++x)
            table.row(h)[x] = q_value(model, x, policy.at(h, x), table.row(h - 1));
    return table;
}

struct Backup {
    ValueRow values;
    std::vector<Action> greedy;
};

/// One application of the optimality operator T; ties go to the lowest action.
inline Backup bellman_backup(const MdpModel& model, std::span<const double> u) {
    if (u.size() != model.num_states())
        throw PreconditionError("backup input has the wrong number of states");
    Backup out{ValueRow(model.num_states()), std::vector<Action>(model.num_states(), 0)};
    for (State x = 0; x < model.num_states(); ++x) {
        double best = q_value(model, x, 0, u);
        Action best_a = 0;
        for (Action a = 1; a < model.num_actions(x); ++a) {
            const double q = q_value(model, x, a, u);
            if (q > best) {
                best = q;
                best_a = a;
            }
        }
        out.values[x] = best;
        out.greedy[x] = best_a;
    }
    return out;
}

struct OptimalSolution {
    ValueTable values;
    FiniteHorizonPolicy policy;
};

/// V*_h = T^h(terminal) for h = 1..H, with level h of the policy greedy for the h-th backup.
inline OptimalSolution backward_induction(const MdpModel& model, std::size_t horizon,
                                          const std::optional<ValueRow>& terminal = std::nullopt) {
    if (horizon == 0) throw PreconditionError("backward induction needs horizon >= 1");
    OptimalSolution sol{ValueTable(horizon, model.num_states()),
                        FiniteHorizonPolicy(horizon, model.num_states())};
    sol.values.row(0) = detail::resolve_terminal(model, terminal);
    for (std::size_t h = 1; h <= horizon; ++h) {
        auto backup = bellman_backup(model, sol.values.row(h - 1));
        sol.values.row(h) = std::move(backup.values);
        for (State x = 0; x < model.num_states(); ++x) sol.policy.set(h, x, backup.greedy[x]);
    }
    return sol;
}

// ---------------------------------------------------------------------------
// Switchable actions and improvable pairs
// ---------------------------------------------------------------------------

/// Actions a with q(x, a, V[h-1]) > V[h](x) + kStrictSlack, ascending.
inline std::vector<Action> switchable_actions(const MdpModel& model, const ValueTable& values,
                                              State x, std::size_t h) {
    if (h == 0 || h > values.horizon())
        throw PreconditionError("switchable_actions: level out of range");
    std::vector<Action> out;
    const double current = values.at(h, x);
    for (Action a = 0; a < model.num_actions(x); ++a)
        if (q_value(model, x, a, values.row(h - 1)) > current + kStrictSlack) out.push_back(a);
    return out;
}

struct ImprovablePair {
    std::size_t level;
    State state;

    auto operator<=>(const ImprovablePair&) const = default;
};

/// Improvable pairs from a precomputed table, ordered by (level, state).
inline std::vector<ImprovablePair> improvable_set(const MdpModel& model, const ValueTable& values,
                                                  std::optional<State> restrict_to_state = {}) {
    std::vector<ImprovablePair> out;
    for (std::size_t h = 1; h <= values.horizon(); ++h) {
        for (State x = 0; x < model.num_states(); ++x) {
            if (restrict_to_state && *restrict_to_state != x) continue;
            if (!switchable_actions(model, values, x, h).empty()) out.push_back({h, x});
        }
    }
    return out;
}

/// Improvable pairs of `policy`; an empty result certifies H-horizon optimality.
inline std::vector<ImprovablePair> improvable_set(const MdpModel& model,
                                                  const FiniteHorizonPolicy& policy,
                                                  std::optional<State> restrict_to_state = {}) {
    if (restrict_to_state && *restrict_to_state >= model.num_states())
        throw PreconditionError("improvable_set: state out of range");
    return improvable_set(model, evaluate_policy(model, policy), restrict_to_state);
}

// ---------------------------------------------------------------------------
// Improvement predicates
// ---------------------------------------------------------------------------

/// V_H(cand) >= V_H(base) everywhere and > base + kStrictSlack somewhere.
inline bool strictly_improves(const ValueTable& cand, const ValueTable& base) {
    const auto& c = cand.top();
    const auto& b = base.top();
    bool strict = false;
    for (State x = 0; x < c.size(); ++x) {
        if (c[x] < b[x]) return false;
        if (c[x] > b[x] + kStrictSlack) strict = true;
    }
    return strict;
}

inline bool strictly_improves(const MdpModel& model, const FiniteHorizonPolicy& cand,
                              const FiniteHorizonPolicy& base) {
    if (cand.horizon() != base.horizon())
        throw PreconditionError("strictly_improves: horizons differ");
    return strictly_improves(evaluate_policy(model, cand), evaluate_policy(model, base));
}

/**
 * Level-wise strict improvement: V_h(cand) >= V_h(base) for every h and x,
 * with a strict gain of more than kStrictSlack at some (h, x).
 *
 * Switching at improvable pairs always yields this ordering. It is weaker
 * than `strictly_improves` when the gain sits at a level whose state
 * cannot be reached from the top level.
 */
inline bool improves_levelwise(const ValueTable& cand, const ValueTable& base) {
    bool strict = false;
    for (std::size_t h = 0; h <= cand.horizon(); ++h) {
        for (State x = 0; x < cand.num_states(); ++x) {
            if (cand.at(h, x) < base.at(h, x)) return false;
            if (cand.at(h, x) > base.at(h, x) + kStrictSlack) strict = true;
        }
    }
    return strict;
}

/// V_h(a) >= V_h(b) at every level and state, no slack.
inline bool dominates_levelwise(const ValueTable& a, const ValueTable& b) {
    for (std::size_t h = 0; h <= a.horizon(); ++h)
        for (State x = 0; x < a.num_states(); ++x)
            if (a.at(h, x) < b.at(h, x)) return false;
    return true;
}

/// Largest |a - b| over all levels and states.
inline double max_abs_difference(const ValueTable& a, const ValueTable& b) {
    double m = 0.0;
    for (std::size_t h = 0; h <= a.horizon(); ++h)
        for (State x = 0; x < a.num_states(); ++x) m = std::max(m, std::abs(a.at(h, x) - b.at(h, x)));
    return m;
}

} // namespace pips
