#pragma once

#include "pips/finite_horizon.hpp"

#include <algorithm>
#include <limits>


namespace pips {

inline constexpr std::size_t kDefaultCandidateBudget = 1024;

enum class CandidateOrigin {
    kSingletonSwitch,
    kGreedySwitch,
    kExhaustiveMember,
    kSupervisor,
    kBase,
};

inline const char* to_string(CandidateOrigin origin) {
    switch (origin) {
    case CandidateOrigin::kSingletonSwitch: return "singleton-switch";
    case CandidateOrigin::kGreedySwitch: return "all-greedy-switch";
    case CandidateOrigin::kExhaustiveMember: return "exhaustive-member";
    case CandidateOrigin::kSupervisor: return "supervisor";
    case CandidateOrigin::kBase: return "base";
    }
    return "unknown";
}

/// One changed entry relative to a base policy.
struct EntrySwitch {
    std::size_t level;
    State state;
    Action action;

    bool operator==(const EntrySwitch&) const = default;
};

struct Candidate {
    FiniteHorizonPolicy policy;
    ValueTable values;
    CandidateOrigin origin;
    std::vector<EntrySwitch> switches;
};

struct CandidateSet {
    FiniteHorizonPolicy base;
    std::vector<Candidate> members;
    bool budget_hit = false;

    bool empty() const { return members.empty(); }
    std::size_t size() const { return members.size(); }
};

// ---------------------------------------------------------------------------
// Policy switching
// ---------------------------------------------------------------------------

/**
 * Combines candidates entry by entry: at level j and state x the result
 * copies the entry of the candidate with the largest V_j(x). Exact ties go
 * to the earliest candidate in the list.
 *
 * Every candidate must carry the values of its own policy.
 */
inline FiniteHorizonPolicy policy_switch(std::span<const FiniteHorizonPolicy> policies,
                                         std::span<const ValueTable* const> values) {
    if (policies.empty()) throw PreconditionError("policy_switch needs a nonempty candidate set");
    if (values.size() != policies.size())
        throw PreconditionError("policy_switch: one value table per candidate is required");
    const std::size_t horizon = policies.front().horizon();
    const std::size_t n = policies.front().num_states();
    for (std::size_t i = 0; i < policies.size(); ++i) {
        if (policies[i].horizon() != horizon || policies[i].num_states() != n)
            throw PreconditionError("policy_switch: candidates differ in shape");
        if (values[i] == nullptr || values[i]->horizon() != horizon)
            throw PreconditionError("policy_switch: missing or mismatched value table");
    }
    FiniteHorizonPolicy out(horizon, n);
    for (std::size_t j = 1; j <= horizon; ++j) {
        for (State x = 0; x < n; ++x) {
            std::size_t best = 0;
            for (std::size_t i = 1; i < policies.size(); ++i)
                if (values[i]->at(j, x) > values[best]->at(j, x)) best = i;
            out.set(j, x, policies[best].at(j, x));
        }
    }
    return out;
}

inline FiniteHorizonPolicy policy_switch(std::span<const Candidate> members) {
    std::vector<FiniteHorizonPolicy> policies;
    std::vector<const ValueTable*> values;
    policies.reserve(members.size());
    values.reserve(members.size());
    for (const auto& m : members) {
        policies.push_back(m.policy);
        values.push_back(&m.values);
    }
    return policy_switch(policies, values);
}

inline FiniteHorizonPolicy policy_switch(const CandidateSet& set) {
    return policy_switch(std::span<const Candidate>(set.members));
}

/// Evaluates each policy, then switches.
inline FiniteHorizonPolicy policy_switch(const MdpModel& model,
                                         std::span<const FiniteHorizonPolicy> policies) {
    std::vector<ValueTable> tables;
    tables.reserve(policies.size());
    for (const auto& p : policies) tables.push_back(evaluate_policy(model, p));
    std::vector<const ValueTable*> ptrs;
    for (const auto& t : tables) ptrs.push_back(&t);
    return policy_switch(policies, ptrs);
}

// ---------------------------------------------------------------------------
// Strict-improvement sets
// ---------------------------------------------------------------------------

namespace detail {

struct SwitchOptions {
    ImprovablePair pair;
    std::vector<Action> actions; ///< switchable actions, ascending
    Action greedy;               ///< argmax of q, lowest index on ties
};

inline std::vector<SwitchOptions> switch_options(const MdpModel& model, const ValueTable& values,
                                                 std::optional<State> restrict_to_state) {
    std::vector<SwitchOptions> out;
    for (const auto& pair : improvable_set(model, values, restrict_to_state)) {
        SwitchOptions opt{pair, switchable_actions(model, values, pair.state, pair.level), 0};
        double best = -std::numeric_limits<double>::infinity();
        for (Action a : opt.actions) {
            const double q = q_value(model, pair.state, a, values.row(pair.level - 1));
            if (q > best) {
                best = q;
                opt.greedy = a;
            }
        }
        out.push_back(std::move(opt));
    }
    return out;
}

/// Product of (1 + |S|) over the pairs, minus one; saturates at cap + 1.
inline std::size_t exhaustive_count(const std::vector<SwitchOptions>& options, std::size_t cap) {
    const std::size_t ceiling = cap + 2;
    std::size_t count = 1;
    for (const auto& opt : options) {
        const std::size_t radix = opt.actions.size() + 1;
        count = count > ceiling / radix ? ceiling : std::min(count * radix, ceiling);
    }
    return count - 1;
}

inline Candidate make_candidate(const MdpModel& model, const FiniteHorizonPolicy& base,
                                std::vector<EntrySwitch> switches, CandidateOrigin origin) {
    FiniteHorizonPolicy p = base;
    for (const auto& s : switches) p.set(s.level, s.state, s.action);
    ValueTable values = evaluate_policy(model, p);
    return Candidate{std::move(p), std::move(values), origin, std::move(switches)};
}

inline CandidateSet build_beta(const MdpModel& model, const FiniteHorizonPolicy& base,
                               const std::vector<SwitchOptions>& options, std::size_t budget) {
    CandidateSet set{base, {}, false};
    if (options.empty()) return set;

    const std::size_t total = exhaustive_count(options, budget);
    if (total <= budget) {
        // Mixed-radix odometer over {keep} ∪ S for every improvable pair; the
        // first pair varies fastest. Digit 0 keeps the base entry.
        std::vector<std::size_t> digits(options.size(), 0);
        for (std::size_t count = 0; count < total; ++count) {
            for (std::size_t i = 0; i < digits.size(); ++i) {
                if (++digits[i] <= options[i].actions.size()) break;
                digits[i] = 0;
            }
            std::vector<EntrySwitch> switches;
            for (std::size_t i = 0; i < digits.size(); ++i)
                if (digits[i] > 0)
                    switches.push_back({options[i].pair.level, options[i].pair.state,
                                        options[i].actions[digits[i] - 1]});
            set.members.push_back(
                make_candidate(model, base, std::move(switches), CandidateOrigin::kExhaustiveMember));
        }
        return set;
    }

    set.budget_hit = true;
    for (const auto& opt : options)
        for (Action a : opt.actions)
            set.members.push_back(make_candidate(model, base,
                                                 {{opt.pair.level, opt.pair.state, a}},
                                                 CandidateOrigin::kSingletonSwitch));
    std::vector<EntrySwitch> greedy;
    for (const auto& opt : options) greedy.push_back({opt.pair.level, opt.pair.state, opt.greedy});
    if (greedy.size() > 1)
        set.members.push_back(
            make_candidate(model, base, std::move(greedy), CandidateOrigin::kGreedySwitch));
    return set;
}

} // namespace detail

/**
 * Strict improvements of `base` obtained by switching entries in column x
 * only. Enumerates every member when the full set fits in `budget`;
 * otherwise keeps every single-entry switch plus the greedy switch of all
 * improvable levels at x, and flags budget_hit.
 */
inline CandidateSet generate_beta_at_state(const MdpModel& model, const FiniteHorizonPolicy& base,
                                           State x, std::size_t budget = kDefaultCandidateBudget) {
    if (x >= model.num_states()) throw PreconditionError("generate_beta_at_state: bad state");
    const ValueTable values = evaluate_policy(model, base);
    return detail::build_beta(model, base, detail::switch_options(model, values, x),
                              budget);
}

/// As generate_beta_at_state, over every improvable pair of `base`.
inline CandidateSet generate_beta(const MdpModel& model, const FiniteHorizonPolicy& base,
                                  std::size_t budget = kDefaultCandidateBudget) {
    const ValueTable values = evaluate_policy(model, base);
    return detail::build_beta(model, base, detail::switch_options(model, values, {}),
                              budget);
}

// ---------------------------------------------------------------------------
// Single-state improvement with supervisor fusion
// ---------------------------------------------------------------------------

/// Per-level suggestions for one state: entry j-1 is the suggestion for level j.
using LevelSuggestions = std::vector<std::optional<Action>>;

enum class SuggestionVerdict { kAccepted, kNotSwitchable, kInadmissible };

inline const char* to_string(SuggestionVerdict v) {
    switch (v) {
    case SuggestionVerdict::kAccepted: return "accepted";
    case SuggestionVerdict::kNotSwitchable: return "not-switchable";
    case SuggestionVerdict::kInadmissible: return "inadmissible";
    }
    return "unknown";
}

struct SuggestionOutcome {
    std::size_t source; ///< index of the suggestion list
    std::size_t level;
    Action action;
    SuggestionVerdict verdict;
    double q = 0.0;         ///< lookahead value against the base continuation
    double threshold = 0.0; ///< base value V_j(x) at the time of the check
};

struct ChangedEntry {
    std::size_t level;
    State state;
    Action old_action;
    Action new_action;
};

struct ImprovementReport {
    State state = 0;
    std::vector<ChangedEntry> changed;
    ValueRow value_gain;
    std::size_t candidates_examined = 0;
    bool budget_hit = false;
    bool fallback_used = false;
    std::vector<SuggestionOutcome> suggestions;

    std::size_t accepted() const {
        std::size_t n = 0;
        for (const auto& s : suggestions) n += s.verdict == SuggestionVerdict::kAccepted;
        return n;
    }
    std::size_t rejected() const { return suggestions.size() - accepted(); }
};

struct ImprovementOptions {
    std::size_t budget = kDefaultCandidateBudget;
    /// Admit a suggested action only if it is switchable against the base.
    /// Disabling this is a diagnostic mode; monotonicity is still enforced by
    /// re-evaluation and fallback.
    bool guard_suggestions = true;
};

struct ImprovementResult {
    FiniteHorizonPolicy policy;
    ImprovementReport report;
};

/**
 * Updates column x of `base` with the x-column of policy switching over the
 * single-state improvement set, one hybrid per nonempty supervisor list
 * (base with its accepted suggestions applied at x), and the base itself.
 *
 * The result leaves every other column untouched and never lowers a V_H
 * component: if re-evaluation shows a decrease, the supervisor-free result is
 * used, and failing that the base.
 */
inline ImprovementResult improve_at_state(const MdpModel& model, const FiniteHorizonPolicy& base,
                                          State x, std::span<const LevelSuggestions> suggestions,
                                          const ImprovementOptions& options = {}) {
    if (x >= model.num_states()) throw PreconditionError("improve_at_state: bad state");
    require_admissible(model, base);
    const std::size_t horizon = base.horizon();
    const ValueTable base_values = evaluate_policy(model, base);

    ImprovementReport report;
    report.state = x;

    CandidateSet beta = detail::build_beta(model, base, detail::switch_options(model, base_values, x),
                                         options.budget);
    report.budget_hit = beta.budget_hit;
    const std::size_t beta_count = beta.members.size();

    std::vector<Candidate> pool = std::move(beta.members);
    for (std::size_t s = 0; s < suggestions.size(); ++s) {
        const auto& list = suggestions[s];
        std::vector<EntrySwitch> switches;
        for (std::size_t j = 1; j <= std::min(horizon, list.size()); ++j) {
            if (!list[j - 1]) continue;
            const Action a = *list[j - 1];
            SuggestionOutcome outcome{s, j, a, SuggestionVerdict::kAccepted, 0.0,
                                      base_values.at(j, x)};
            if (!model.admissible(x, a)) {
                outcome.verdict = SuggestionVerdict::kInadmissible;
            } else {
                outcome.q = q_value(model, x, a, base_values.row(j - 1));
                const bool switchable = outcome.q > outcome.threshold + kStrictSlack;
                if (options.guard_suggestions && !switchable)
                    outcome.verdict = SuggestionVerdict::kNotSwitchable;
                else if (a != base.at(j, x))
                    switches.push_back({j, x, a});
            }
            report.suggestions.push_back(outcome);
        }
        if (!switches.empty())
            pool.push_back(detail::make_candidate(model, base, std::move(switches),
                                                  CandidateOrigin::kSupervisor));
    }
    report.candidates_examined = pool.size();

    if (pool.empty()) {
        report.value_gain.assign(model.num_states(), 0.0);
        return {base, std::move(report)};
    }

    auto switched_column = [&](std::span<const Candidate> members) {
        std::vector<Candidate> with_base(members.begin(), members.end());
        with_base.push_back(Candidate{base, base_values, CandidateOrigin::kBase, {}});
        FiniteHorizonPolicy combined = policy_switch(std::span<const Candidate>(with_base));
        FiniteHorizonPolicy out = base;
        out.set_column(x, combined.column(x));
        return out;
    };
    auto never_lower = [&](const ValueTable& v) {
        for (State y = 0; y < model.num_states(); ++y)
            if (v.top()[y] < base_values.top()[y] - kStrictSlack) return false;
        return true;
    };

    FiniteHorizonPolicy result = switched_column(pool);
    ValueTable result_values = evaluate_policy(model, result);
    if (!never_lower(result_values)) {
        report.fallback_used = true;
        result = beta_count > 0
                     ? switched_column(std::span<const Candidate>(pool.data(), beta_count))
                     : base;
        result_values = evaluate_policy(model, result);
        if (!never_lower(result_values)) {
            result = base;
            result_values = base_values;
        }
    }

    for (std::size_t j = 1; j <= horizon; ++j)
        if (result.at(j, x) != base.at(j, x))
            report.changed.push_back({j, x, base.at(j, x), result.at(j, x)});
    report.value_gain.resize(model.num_states());
    for (State y = 0; y < model.num_states(); ++y)
        report.value_gain[y] = result_values.top()[y] - base_values.top()[y];
    return {std::move(result), std::move(report)};
}

inline ImprovementResult improve_at_state(const MdpModel& model, const FiniteHorizonPolicy& base,
                                          State x, const ImprovementOptions& options = {}) {
    return improve_at_state(model, base, x, std::span<const LevelSuggestions>{}, options);
}

// ---------------------------------------------------------------------------
// Off-line drivers
// ---------------------------------------------------------------------------

struct SyncResult {
    FiniteHorizonPolicy policy;
    std::size_t iterations = 0;
    /// Values of the initial policy followed by one table per improvement.
    std::vector<ValueTable> snapshots;
};

/**
 * Synchronous policy iteration with policy switching: replace the policy by
 * the switch over its full strict-improvement set until no pair is
 * improvable.
 */
inline SyncResult run_pips_sync(const MdpModel& model, const FiniteHorizonPolicy& initial,
                                std::size_t budget = kDefaultCandidateBudget) {
    require_admissible(model, initial);
    SyncResult result{initial, 0, {evaluate_policy(model, initial)}};
    for (;;) {
        CandidateSet beta = generate_beta(model, result.policy, budget);
        if (beta.empty()) break;
        result.policy = policy_switch(beta);
        result.snapshots.push_back(evaluate_policy(model, result.policy));
        ++result.iterations;
    }
    return result;
}

/// Source of update states for the asynchronous driver.
class StateSchedule {
public:
    enum class Kind { kImprovableFirst, kSequence };

    /// Lowest-index state with a nonempty improvable set.
    static StateSchedule improvable_first() { return StateSchedule(Kind::kImprovableFirst, {}); }

    /// Fixed sequence, repeated cyclically.
    static StateSchedule sequence(std::vector<State> states) {
        if (states.empty()) throw PreconditionError("explicit schedule must not be empty");
        return StateSchedule(Kind::kSequence, std::move(states));
    }

    Kind kind() const { return kind_; }
    const std::vector<State>& states() const { return states_; }

private:
    StateSchedule(Kind kind, std::vector<State> states) : kind_(kind), states_(std::move(states)) {}

    Kind kind_;
    std::vector<State> states_;
};

/**
 * H blocks, each a seeded permutation of all states. Sweeping it solves the
 * 1-step problem at every state before the 2-step problem, and so on.
 */
inline std::vector<State> level_embedded_schedule(const MdpModel& model, std::size_t horizon,
                                                  std::uint64_t permutation_seed) {
    if (horizon == 0) throw PreconditionError("level_embedded_schedule needs horizon >= 1");
    RngStream rng(permutation_seed);
    std::vector<State> out;
    out.reserve(horizon * model.num_states());
    std::vector<State> block(model.num_states());
    for (std::size_t h = 0; h < horizon; ++h) {
        for (State x = 0; x < block.size(); ++x) block[x] = x;
        for (std::size_t i = block.size(); i > 1; --i) std::swap(block[i - 1], block[rng.below(i)]);
        out.insert(out.end(), block.begin(), block.end());
    }
    return out;
}

struct AsyncResult {
    FiniteHorizonPolicy policy;
    /// One report per applied update (steps whose state was improvable).
    std::vector<ImprovementReport> reports;
    std::size_t steps = 0;
    /// True iff the run reached a policy with no improvable pair.
    bool terminated = false;
};

/**
 * Asynchronous PIPS: each step picks one state from the schedule and, if it
 * is improvable, replaces its column by the switched column of its
 * single-state improvement set. Stops when no pair is improvable or after
 * max_steps.
 */
inline AsyncResult run_pips_async_offline(const MdpModel& model, const FiniteHorizonPolicy& initial,
                                          const StateSchedule& schedule,
                                          std::size_t budget = kDefaultCandidateBudget,
                                          std::size_t max_steps = 100000) {
    require_admissible(model, initial);
    for (State x : schedule.states())
        if (x >= model.num_states())
            throw PreconditionError("schedule contains invalid state " + std::to_string(x));

    AsyncResult result{initial, {}, 0, false};
    const ImprovementOptions options{budget, true};
    std::size_t cursor = 0;
    while (true) {
        const ValueTable values = evaluate_policy(model, result.policy);
        const auto improvable = improvable_set(model, values);
        if (improvable.empty()) {
            result.terminated = true;
            break;
        }
        if (result.steps >= max_steps) break;
        ++result.steps;

        State x;
        if (schedule.kind() == StateSchedule::Kind::kImprovableFirst) {
            x = std::min_element(improvable.begin(), improvable.end(),
                                 [](const auto& a, const auto& b) { return a.state < b.state; })
                    ->state;
        } else {
            x = schedule.states()[cursor];
            cursor = (cursor + 1) % schedule.states().size();
        }
        const bool x_improvable = std::any_of(improvable.begin(), improvable.end(),
                                              [x](const auto& p) { return p.state == x; });
        if (!x_improvable) continue;
        auto step = improve_at_state(model, result.policy, x, options);
        result.policy = std::move(step.policy);
        result.reports.push_back(std::move(step.report));
    }
    return result;
}

} // namespace pips
