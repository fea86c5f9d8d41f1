#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pips {

using State = std::size_t;
using Action = std::size_t;

/// A real-valued function over states, indexed by state.
using ValueRow = std::vector<double>;

/// Absolute tolerance on probability rows.
inline constexpr double kRowSumTolerance = 1e-9;
/// Slack for strict comparisons (q > V + slack).
inline constexpr double kStrictSlack = 1e-12;
/// Slack for value equality checks against oracles.
inline constexpr double kEqualitySlack = 1e-9;

/// Raised when an operation is called outside its documented domain.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

/**
 * Seeded pseudo-random stream. Wraps a 64-bit Mersenne twister and derives
 * uniform doubles and bounded integers from raw output bits, so draws are
 * identical across standard library implementations.
 *
 * One stream belongs to one sequential consumer. Independent consumers should
 * use `RngStream::derive(seed, id)` rather than sharing.
 */
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    /// Stream seeded from (seed, stream id) through a splitmix64 mix.
    static RngStream derive(std::uint64_t seed, std::uint64_t stream_id) {
        return RngStream(splitmix64(seed ^ splitmix64(stream_id + 0x9E3779B97F4A7C15ULL)));
    }

    std::uint64_t next() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1].
    double uniform_open_zero() { return 1.0 - uniform(); }

    /// Uniform integer in [0, n). Requires n > 0.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw PreconditionError("RngStream::below requires n > 0");
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t r;
        do {
            r = next();
        } while (r >= limit);
        return r % n;
    }

    static std::uint64_t splitmix64(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/**
 * Finite discounted MDP with ragged admissible-action sets.
 *
 * rewards[x][a] is R(x,a); transitions[x][a][y] is the probability of moving
 * from x to y under a. The model does not validate itself on construction so
 * that malformed data can be reported by `validate_model`; every solver
 * assumes a model that validates cleanly.
 */
class MdpModel {
public:
    using RewardTable = std::vector<std::vector<double>>;
    using TransitionTable = std::vector<std::vector<std::vector<double>>>;

    MdpModel() = default;
    MdpModel(std::string name, double gamma, std::size_t num_states,
             std::vector<std::size_t> actions_per_state, RewardTable rewards,
             TransitionTable transitions)
        : name_(std::move(name)),
          gamma_(gamma),
          num_states_(num_states),
          actions_per_state_(std::move(actions_per_state)),
          rewards_(std::move(rewards)),
          transitions_(std::move(transitions)) {}

    const std::string& name() const { return name_; }
    double gamma() const { return gamma_; }
    std::size_t num_states() const { return num_states_; }
    std::size_t num_actions(State x) const { return actions_per_state_[x]; }
    const std::vector<std::size_t>& actions_per_state() const { return actions_per_state_; }
    std::size_t max_actions() const {
        std::size_t m = 0;
        for (auto n : actions_per_state_) m = std::max(m, n);
        return m;
    }

    double reward(State x, Action a) const { return rewards_[x][a]; }
    double prob(State x, Action a, State y) const { return transitions_[x][a][y]; }
    std::span<const double> row(State x, Action a) const { return transitions_[x][a]; }

    const RewardTable& rewards() const { return rewards_; }
    const TransitionTable& transitions() const { return transitions_; }

    bool admissible(State x, Action a) const {
        return x < num_states_ && x < actions_per_state_.size() && a < actions_per_state_[x];
    }

    /// Largest |R(x,a)| over admissible pairs.
    double max_abs_reward() const {
        double m = 0.0;
        for (const auto& r : rewards_)
            for (double v : r) m = std::max(m, std::abs(v));
        return m;
    }

    bool operator==(const MdpModel&) const = default;

private:
    std::string name_;
    double gamma_ = 0.5;
    std::size_t num_states_ = 0;
    std::vector<std::size_t> actions_per_state_;
    RewardTable rewards_;
    TransitionTable transitions_;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class IssueKind {
    kNoStates,
    kShapeMismatch,
    kNoActions,
    kDiscountOutOfRange,
    kNonFiniteReward,
    kProbabilityOutOfRange,
    kRowSum,
};

struct ValidationIssue {
    IssueKind kind;
    std::optional<State> state;
    std::optional<Action> action;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool ok() const { return issues.empty(); }

    std::string to_string() const {
        std::ostringstream os;
        for (const auto& issue : issues) os << issue.message << '\n';
        return os.str();
    }
};

namespace detail {

inline std::string pair_label(State x, Action a) {
    return "(x=" + std::to_string(x) + ", a=" + std::to_string(a) + ")";
}

} // namespace detail

/// Checks every model invariant. Never throws; an empty report means valid.
inline ValidationReport validate_model(const MdpModel& model) {
    ValidationReport report;
    auto add = [&](IssueKind kind, std::optional<State> x, std::optional<Action> a,
                   std::string msg) { report.issues.push_back({kind, x, a, std::move(msg)}); };

    const double gamma = model.gamma();
    if (!(gamma > 0.0 && gamma < 1.0)) {
        std::ostringstream os;
        os << "discount out of range: gamma=" << gamma << " must lie in (0,1)";
        add(IssueKind::kDiscountOutOfRange, std::nullopt, std::nullopt, os.str());
    }

    const std::size_t n = model.num_states();
    if (n == 0) {
        add(IssueKind::kNoStates, std::nullopt, std::nullopt, "model has no states");
        return report;
    }
    if (model.actions_per_state().size() != n || model.rewards().size() != n ||
        model.transitions().size() != n) {
        add(IssueKind::kShapeMismatch, std::nullopt, std::nullopt,
            "per-state tables do not have num_states=" + std::to_string(n) + " entries");
        return report;
    }

    for (State x = 0; x < n; ++x) {
        const std::size_t na = model.num_actions(x);
        if (na == 0) {
            add(IssueKind::kNoActions, x, std::nullopt,
                "state " + std::to_string(x) + " has no admissible action");
            continue;
        }
        if (model.rewards()[x].size() != na || model.transitions()[x].size() != na) {
            add(IssueKind::kShapeMismatch, x, std::nullopt,
                "state " + std::to_string(x) + ": reward/transition tables must have " +
                    std::to_string(na) + " actions");
            continue;
        }
        for (Action a = 0; a < na; ++a) {
            if (!std::isfinite(model.reward(x, a)))
                add(IssueKind::kNonFiniteReward, x, a,
                    "non-finite reward at " + detail::pair_label(x, a));
            const auto& row = model.transitions()[x][a];
            if (row.size() != n) {
                add(IssueKind::kShapeMismatch, x, a,
                    "transition row " + detail::pair_label(x, a) + " has " +
                        std::to_string(row.size()) + " entries, expected " + std::to_string(n));
                continue;
            }
            double sum = 0.0;
            bool in_range = true;
            for (double p : row) {
                if (!std::isfinite(p) || p < 0.0 || p > 1.0) in_range = false;
                sum += p;
            }
            if (!in_range)
                add(IssueKind::kProbabilityOutOfRange, x, a,
                    "transition row " + detail::pair_label(x, a) +
                        " has an entry outside [0,1]");
            if (!(std::abs(sum - 1.0) <= kRowSumTolerance)) {
                std::ostringstream os;
                os.precision(12);
                os << "transition row " << detail::pair_label(x, a) << " sums to " << sum;
                add(IssueKind::kRowSum, x, a, os.str());
            }
        }
    }
    return report;
}

/// Throws PreconditionError unless a is admissible at x.
inline void require_admissible(const MdpModel& model, State x, Action a) {
    if (!model.admissible(x, a))
        throw PreconditionError("action " + std::to_string(a) + " is not admissible at state " +
                                std::to_string(x));
}

// ---------------------------------------------------------------------------
// Sampling and generation
// ---------------------------------------------------------------------------

/// Draws y with probability P[x][a][y]. Advances rng by one draw.
inline State sample_next_state(const MdpModel& model, State x, Action a, RngStream& rng) {
    require_admissible(model, x, a);
    const auto row = model.row(x, a);
    const double u = rng.uniform();
    double cumulative = 0.0;
    std::optional<State> last_support;
    for (State y = 0; y < row.size(); ++y) {
        if (row[y] <= 0.0) continue;
        cumulative += row[y];
        last_support = y;
        if (u < cumulative) return y;
    }
    // u landed in the rounding gap above the cumulative sum.
    return last_support.value_or(0);
}

struct GenConfig {
    std::size_t num_states = 4;
    std::size_t num_actions = 2;
    double transition_density = 1.0;
    double reward_lo = 0.0;
    double reward_hi = 1.0;
    bool ensure_positive = false;
    /// Mass added to every transition entry before renormalizing when ensure_positive.
    double positive_epsilon = 0.01;
    double gamma = 0.9;
    std::uint64_t seed = 0;
    std::string name = "random";

    void check() const {
        if (num_states == 0) throw PreconditionError("GenConfig: num_states must be positive");
        if (num_actions == 0) throw PreconditionError("GenConfig: num_actions must be positive");
        if (!(transition_density > 0.0 && transition_density <= 1.0))
            throw PreconditionError("GenConfig: transition_density must lie in (0,1]");
        if (!(reward_lo <= reward_hi))
            throw PreconditionError("GenConfig: reward_lo must not exceed reward_hi");
        if (!(gamma > 0.0 && gamma < 1.0))
            throw PreconditionError("GenConfig: gamma must lie in (0,1)");
        if (ensure_positive && !(positive_epsilon > 0.0))
            throw PreconditionError("GenConfig: positive_epsilon must be positive");
    }
};

/**
 * Random MDP with every state offering cfg.num_actions actions.
 *
 * Each transition row keeps each successor with probability
 * transition_density (at least one successor always survives), gives kept
 * successors weights in (0,1], and normalizes. The result is a pure function
 * of cfg; cfg.seed is the only source of randomness.
 */
inline MdpModel generate_random_mdp(const GenConfig& cfg) {
    cfg.check();
    RngStream rng(cfg.seed);
    const std::size_t n = cfg.num_states;
    MdpModel::RewardTable rewards(n, std::vector<double>(cfg.num_actions));
    MdpModel::TransitionTable transitions(
        n, std::vector<std::vector<double>>(cfg.num_actions, std::vector<double>(n, 0.0)));

    for (State x = 0; x < n; ++x) {
        for (Action a = 0; a < cfg.num_actions; ++a) {
            rewards[x][a] = cfg.reward_lo + (cfg.reward_hi - cfg.reward_lo) * rng.uniform();
            auto& row = transitions[x][a];
            bool any = false;
            for (State y = 0; y < n; ++y) {
                const bool keep = cfg.transition_density >= 1.0 ||
                                  rng.uniform() < cfg.transition_density;
                if (keep) {
                    row[y] = rng.uniform_open_zero();
                    any = true;
                }
            }
            if (!any) row[rng.below(n)] = 1.0;
            double sum = 0.0;
            for (double p : row) sum += p;
            for (double& p : row) p /= sum;
            if (cfg.ensure_positive) {
                for (double& p : row) p += cfg.positive_epsilon;
                const double total = 1.0 + cfg.positive_epsilon * static_cast<double>(n);
                for (double& p : row) p /= total;
            }
        }
    }
    return MdpModel(cfg.name, cfg.gamma, n, std::vector<std::size_t>(n, cfg.num_actions),
                    std::move(rewards), std::move(transitions));
}

/// Overload taking an explicit stream; draws one seed from rng.
inline MdpModel generate_random_mdp(GenConfig cfg, RngStream& rng) {
    cfg.seed = rng.next();
    return generate_random_mdp(cfg);
}

} // namespace pips
