#pragma once

#include "pips/chain_analysis.hpp"
#include "pips/policy_switching.hpp"

#include <functional>
#include <memory>
#include <string>

namespace pips {

// ---------------------------------------------------------------------------
// Supervisors
// ---------------------------------------------------------------------------

struct SupervisorContext {
    const MdpModel& model;
    std::size_t step;
    State state;
    const FiniteHorizonPolicy& policy;
};

/**
 * External source of action suggestions for the visited state. Each call
 * returns zero or more per-level suggestion lists; each list is fused as one
 * candidate. Calls happen synchronously, once per controller step.
 */
struct Supervisor {
    std::string name;
    std::function<std::vector<LevelSuggestions>(const SupervisorContext&)> suggest;
};

enum class SupervisorKind { kNull, kOracle, kRandom, kAdversarial };

inline const char* to_string(SupervisorKind kind) {
    switch (kind) {
    case SupervisorKind::kNull: return "null";
    case SupervisorKind::kOracle: return "oracle";
    case SupervisorKind::kRandom: return "random";
    case SupervisorKind::kAdversarial: return "adversarial";
    }
    return "unknown";
}

inline std::optional<SupervisorKind> parse_supervisor_kind(std::string_view text) {
    if (text == "null") return SupervisorKind::kNull;
    if (text == "oracle") return SupervisorKind::kOracle;
    if (text == "random") return SupervisorKind::kRandom;
    if (text == "adversarial") return SupervisorKind::kAdversarial;
    return std::nullopt;
}

struct SupervisorParams {
    std::uint64_t seed = 0;
    /// Required by the oracle kind: an optimal H-length policy.
    std::optional<FiniteHorizonPolicy> oracle_policy;
};

/**
 * null: never suggests. oracle: the visited column of the optimal policy.
 * random: uniform admissible action per level from its own seeded stream.
 * adversarial: per level, the action with the smallest lookahead value against
 * the current policy's continuation.
 */
inline Supervisor builtin_supervisor(SupervisorKind kind, const SupervisorParams& params = {}) {
    switch (kind) {
    case SupervisorKind::kNull:
        return {"null", [](const SupervisorContext&) { return std::vector<LevelSuggestions>{}; }};
    case SupervisorKind::kOracle: {
        if (!params.oracle_policy)
            throw PreconditionError("oracle supervisor requires a precomputed optimal policy");
        auto oracle = std::make_shared<const FiniteHorizonPolicy>(*params.oracle_policy);
        return {"oracle", [oracle](const SupervisorContext& ctx) {
                    if (oracle->horizon() != ctx.policy.horizon())
                        throw PreconditionError("oracle horizon differs from the controller's");
                    LevelSuggestions s;
                    for (Action a : oracle->column(ctx.state)) s.emplace_back(a);
                    return std::vector<LevelSuggestions>{std::move(s)};
                }};
    }
    case SupervisorKind::kRandom: {
        auto rng = std::make_shared<RngStream>(params.seed);
        return {"random", [rng](const SupervisorContext& ctx) {
                    LevelSuggestions s;
                    for (std::size_t j = 1; j <= ctx.policy.horizon(); ++j)
                        s.emplace_back(rng->below(ctx.model.num_actions(ctx.state)));
                    return std::vector<LevelSuggestions>{std::move(s)};
                }};
    }
    case SupervisorKind::kAdversarial:
        return {"adversarial", [](const SupervisorContext& ctx) {
                    const auto values = evaluate_policy(ctx.model, ctx.policy);
                    LevelSuggestions s;
                    for (std::size_t j = 1; j <= ctx.policy.horizon(); ++j) {
                        Action worst = 0;
                        double lowest = std::numeric_limits<double>::infinity();
                        for (Action a = 0; a < ctx.model.num_actions(ctx.state); ++a) {
                            const double q = q_value(ctx.model, ctx.state, a, values.row(j - 1));
                            if (q < lowest) {
                                lowest = q;
                                worst = a;
                            }
                        }
                        s.emplace_back(worst);
                    }
                    return std::vector<LevelSuggestions>{std::move(s)};
                }};
    }
    throw PreconditionError("unknown supervisor kind");
}

// ---------------------------------------------------------------------------
// Controller
// ---------------------------------------------------------------------------

struct StepRecord {
    std::size_t k = 0;
    State state = 0;
    Action action = 0;
    double reward = 0.0;
    State next_state = 0;
    std::vector<std::size_t> changed_levels;
    std::size_t suggestions_offered = 0;
    std::size_t suggestions_accepted = 0;
    std::size_t suggestions_rejected = 0;
    std::vector<SuggestionOutcome> suggestions;
    std::vector<std::string> supervisor_faults;
    bool fallback_used = false;
    /// V_H(state) of the updated policy.
    double value_at_state = 0.0;
};

struct StepOutcome {
    FiniteHorizonPolicy policy;
    StepRecord record;
    State next_state;
};

struct StepOptions {
    std::size_t budget = kDefaultCandidateBudget;
    bool guard_suggestions = true;
};

/**
 * One controller step at x: gather supervisor suggestions, improve the policy
 * at x only, take the top-level action of the updated policy, and move.
 * When `forced_next` is set it replaces the sampled successor; rng is then
 * left untouched.
 */
inline StepOutcome online_step(const MdpModel& model, const FiniteHorizonPolicy& policy, State x,
                               std::span<const Supervisor> supervisors, RngStream& rng,
                               std::size_t k, const StepOptions& options = {},
                               std::optional<State> forced_next = std::nullopt) {
    if (x >= model.num_states()) throw PreconditionError("online_step: bad state");
    require_admissible(model, policy);

    StepRecord rec;
    rec.k = k;
    rec.state = x;

    std::vector<LevelSuggestions> suggestions;
    for (const auto& sup : supervisors) {
        try {
            auto lists = sup.suggest(SupervisorContext{model, k, x, policy});
            for (auto& l : lists) suggestions.push_back(std::move(l));
        } catch (const std::exception& e) {
            rec.supervisor_faults.push_back(sup.name + ": " + e.what());
        } catch (...) {
            rec.supervisor_faults.push_back(sup.name + ": unknown failure");
        }
    }

    auto improved = improve_at_state(model, policy, x, suggestions,
                                     ImprovementOptions{options.budget, options.guard_suggestions});
    for (const auto& c : improved.report.changed) rec.changed_levels.push_back(c.level);
    rec.suggestions = improved.report.suggestions;
    rec.suggestions_offered = rec.suggestions.size();
    rec.suggestions_accepted = improved.report.accepted();
    rec.suggestions_rejected = improved.report.rejected();
    rec.fallback_used = improved.report.fallback_used;

    rec.action = improved.policy.first_entry()[x];
    rec.reward = model.reward(x, rec.action);
    if (forced_next) {
        if (*forced_next >= model.num_states())
            throw PreconditionError("external state stream contains an invalid state");
        rec.next_state = *forced_next;
    } else {
        rec.next_state = sample_next_state(model, x, rec.action, rng);
    }
    rec.value_at_state = evaluate_policy(model, improved.policy).top()[x];
    const State next = rec.next_state;
    return {std::move(improved.policy), std::move(rec), next};
}

struct OnlineConfig {
    std::size_t horizon = 1;
    std::size_t max_steps = 1000;
    State initial_state = 0;
    /// When set, the first state is drawn from this distribution instead.
    std::optional<std::vector<double>> initial_distribution;
    /// When unset, an arbitrary admissible policy is drawn from the seed.
    std::optional<FiniteHorizonPolicy> initial_policy;
    std::size_t budget = kDefaultCandidateBudget;
    /// Trailing steps without any change needed to call the run stable.
    std::size_t window = 0; ///< 0 selects 4 * |X|
    std::uint64_t seed = 0;
    /// When set, successors come from this stream instead of the model.
    std::optional<std::vector<State>> state_stream;
    bool guard_suggestions = true;
    /// Stop as soon as the stability window passes.
    bool stop_when_stable = true;
    /// Keep V_H of every step's policy in the trace.
    bool record_values = true;

    std::size_t effective_window(const MdpModel& model) const {
        return window == 0 ? 4 * model.num_states() : window;
    }

    void check(const MdpModel& model) const {
        if (horizon == 0) throw PreconditionError("OnlineConfig: horizon must be at least 1");
        if (max_steps == 0) throw PreconditionError("OnlineConfig: max_steps must be at least 1");
        if (effective_window(model) < model.num_states())
            throw PreconditionError("OnlineConfig: window must be at least |X|");
        if (initial_state >= model.num_states())
            throw PreconditionError("OnlineConfig: initial state out of range");
        if (initial_distribution) {
            if (initial_distribution->size() != model.num_states())
                throw PreconditionError("OnlineConfig: initial distribution has the wrong size");
            double sum = 0.0;
            for (double p : *initial_distribution) {
                if (!(p >= 0.0)) throw PreconditionError("OnlineConfig: negative probability");
                sum += p;
            }
            if (std::abs(sum - 1.0) > kRowSumTolerance)
                throw PreconditionError("OnlineConfig: initial distribution must sum to 1");
        }
        if (initial_policy) {
            if (initial_policy->horizon() != horizon)
                throw PreconditionError("OnlineConfig: initial policy horizon mismatch");
            require_admissible(model, *initial_policy);
        }
        if (state_stream)
            for (State s : *state_stream)
                if (s >= model.num_states())
                    throw PreconditionError("OnlineConfig: state stream has an invalid state");
    }
};

struct ClassCheck {
    std::vector<State> members;
    bool recurrent = false;
    /// improvable_empty[i] refers to members[i].
    std::vector<bool> improvable_empty;
};

enum class LocalVerdict { kLocallyOptimal, kNotLocallyOptimal, kInconclusive };

inline const char* to_string(LocalVerdict v) {
    switch (v) {
    case LocalVerdict::kLocallyOptimal: return "locally-optimal";
    case LocalVerdict::kNotLocallyOptimal: return "not-locally-optimal";
    case LocalVerdict::kInconclusive: return "inconclusive";
    }
    return "unknown";
}

struct LocalOptReport {
    LocalVerdict verdict = LocalVerdict::kInconclusive;
    /// Classes of the stationary top-level policy that were visited after K.
    std::vector<ClassCheck> classes;
    bool globally_optimal = false;
};

struct OnlineTrace {
    std::vector<StepRecord> records;
    FiniteHorizonPolicy final_policy;
    /// Last step that changed the policy (0 if none); set only when stable.
    std::optional<std::size_t> stabilization_step;
    std::size_t last_change_step = 0;
    bool stopped_early = false;
    /// V_H of the initial policy followed by one row per step.
    std::vector<ValueRow> values;
    bool monotone = true;
    std::optional<LocalOptReport> local_optimality;
};

/**
 * Checks that the stabilized policy has no improvable pair at any state of
 * the communicating classes (under its top-level mapping) of the states
 * visited after stabilization. Unstable traces are inconclusive.
 */
inline LocalOptReport verify_local_optimality(const MdpModel& model, const OnlineTrace& trace) {
    LocalOptReport report;
    if (!trace.stabilization_step) return report;
    const std::size_t K = *trace.stabilization_step;
    const auto partition = communicating_classes(model, trace.final_policy.first_entry());
    const auto values = evaluate_policy(model, trace.final_policy);

    std::vector<bool> class_seen(partition.size(), false);
    for (const auto& rec : trace.records)
        if (rec.k > K) class_seen[partition.class_of[rec.state]] = true;

    bool all_ok = true;
    bool any = false;
    for (std::size_t c = 0; c < partition.size(); ++c) {
        if (!class_seen[c]) continue;
        any = true;
        ClassCheck check{partition.classes[c], static_cast<bool>(partition.recurrent[c]), {}};
        for (State x : check.members) {
            const bool empty = improvable_set(model, values, x).empty();
            check.improvable_empty.push_back(empty);
            all_ok = all_ok && empty;
        }
        report.classes.push_back(std::move(check));
    }
    if (!any) return report;
    report.verdict = all_ok ? LocalVerdict::kLocallyOptimal : LocalVerdict::kNotLocallyOptimal;
    report.globally_optimal = improvable_set(model, values).empty();
    return report;
}

/**
 * Closed-loop rolling-horizon control with on-line asynchronous PIPS.
 *
 * Runs max_steps steps, or fewer when stop_when_stable is set and `window`
 * consecutive steps change nothing while every state in the top-level
 * classes of the states visited in that window has an empty improvable set. The trace carries K and the local-optimality
 * report whenever the run ends stable.
 */
inline OnlineTrace run_online(const MdpModel& model, const OnlineConfig& cfg,
                              std::span<const Supervisor> supervisors = {}) {
    cfg.check(model);
    const std::size_t window = cfg.effective_window(model);
    RngStream transition_rng = RngStream::derive(cfg.seed, 1);

    FiniteHorizonPolicy policy;
    if (cfg.initial_policy) {
        policy = *cfg.initial_policy;
    } else {
        RngStream policy_rng = RngStream::derive(cfg.seed, 2);
        policy = random_policy(model, cfg.horizon, policy_rng);
    }

    State x = cfg.initial_state;
    if (cfg.initial_distribution) {
        RngStream start_rng = RngStream::derive(cfg.seed, 3);
        const double u = start_rng.uniform();
        double cumulative = 0.0;
        for (State y = 0; y < model.num_states(); ++y) {
            if ((*cfg.initial_distribution)[y] <= 0.0) continue;
            cumulative += (*cfg.initial_distribution)[y];
            x = y;
            if (u < cumulative) break;
        }
    }

    OnlineTrace trace;
    ValueRow previous = evaluate_policy(model, policy).top();
    if (cfg.record_values) trace.values.push_back(previous);

    const StepOptions options{cfg.budget, cfg.guard_suggestions};
    std::size_t quiet = 0;
    for (std::size_t k = 1; k <= cfg.max_steps; ++k) {
        std::optional<State> forced;
        if (cfg.state_stream) {
            if (k - 1 >= cfg.state_stream->size()) break;
            forced = (*cfg.state_stream)[k - 1];
        }
        auto step = online_step(model, policy, x, supervisors, transition_rng, k, options, forced);

        const ValueRow current = evaluate_policy(model, step.policy).top();
        for (State y = 0; y < current.size(); ++y)
            if (current[y] < previous[y] - kStrictSlack) trace.monotone = false;
        if (cfg.record_values) trace.values.push_back(current);
        previous = current;

        if (!step.record.changed_levels.empty()) {
            trace.last_change_step = k;
            quiet = 0;
        } else {
            ++quiet;
        }
        policy = std::move(step.policy);
        x = step.next_state;
        trace.records.push_back(std::move(step.record));

        if (cfg.stop_when_stable && quiet >= window) {
            // Every state sharing a top-level class with a window state must be settled too.
            const auto values = evaluate_policy(model, policy);
            const auto partition = communicating_classes(model, policy.first_entry());
            std::vector<bool> seen(partition.size(), false);
            for (std::size_t i = trace.records.size() - window; i < trace.records.size(); ++i)
                seen[partition.class_of[trace.records[i].state]] = true;
            bool settled = true;
            for (std::size_t c = 0; c < partition.size() && settled; ++c)
                if (seen[c])
                    for (State y : partition.classes[c])
                        if (!improvable_set(model, values, y).empty()) settled = false;
            if (settled) {
                trace.stopped_early = k < cfg.max_steps;
                break;
            }
        }
    }

    trace.final_policy = policy;
    if (quiet >= window) trace.stabilization_step = trace.last_change_step;
    trace.local_optimality = verify_local_optimality(model, trace);
    return trace;
}

} // namespace pips
