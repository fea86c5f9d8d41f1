#pragma once

#include "pips/io.hpp"
#include "pips/pips.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <numeric>
#include <sstream>

namespace pips::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 2;
inline constexpr int kExitDomain = 3;
inline constexpr int kExitUsage = 64;

namespace detail {

inline void print_values(std::ostream& out, const std::string& label, const ValueTable& v) {
    for (std::size_t h = 0; h <= v.horizon(); ++h)
        out << label << "[" << h << "] = " << io::fmt_row(v.row(h)) << "\n";
}

inline void print_policy(std::ostream& out, const std::string& label, const FiniteHorizonPolicy& p) {
    for (std::size_t j = 1; j <= p.horizon(); ++j)
        out << label << "[" << j << "] = " << io::fmt_row(p.level(j)) << "\n";
}

inline std::string fmt_set(std::span<const State> s) {
    std::string out = "{";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "}";
}

inline FiniteHorizonPolicy initial_policy(const MdpModel& model, std::size_t horizon,
                                          const std::string& init_path) {
    if (init_path.empty()) return FiniteHorizonPolicy(horizon, model.num_states(), 0);
    auto p = io::load_policy(init_path);
    if (p.horizon() != horizon)
        throw PreconditionError("initial policy horizon " + std::to_string(p.horizon()) +
                                " does not match -H " + std::to_string(horizon));
    require_admissible(model, p);
    return p;
}

inline std::optional<ValueRow> terminal_row(const std::string& path) {
    if (path.empty()) return std::nullopt;
    return io::load_value_row(path);
}

} // namespace detail

/**
 * Runs one subcommand. Exit codes: 0 success, 2 I/O or parse failure,
 * 3 invalid model or violated precondition, 64 usage error.
 */
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Finite-horizon policy iteration with policy switching"};
    app.require_subcommand(1);

    std::string model_path;
    std::size_t horizon = 0;
    std::string init_path;
    std::string terminal_path;
    std::size_t budget = kDefaultCandidateBudget;

    // validate
    auto* validate = app.add_subcommand("validate", "Check a model file");
    validate->add_option("model", model_path)->required();

    // gen
    GenConfig gen_cfg;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen", "Generate a random model");
    gen->add_option("--states", gen_cfg.num_states)->required();
    gen->add_option("--actions", gen_cfg.num_actions)->required();
    gen->add_option("--density", gen_cfg.transition_density);
    gen->add_option("--reward-lo", gen_cfg.reward_lo);
    gen->add_option("--reward-hi", gen_cfg.reward_hi);
    gen->add_flag("--ensure-positive", gen_cfg.ensure_positive);
    gen->add_option("--epsilon", gen_cfg.positive_epsilon);
    gen->add_option("--gamma", gen_cfg.gamma);
    gen->add_option("--seed", gen_cfg.seed);
    gen->add_option("--name", gen_cfg.name);
    gen->add_option("-o,--output", gen_out)->required();

    // solve
    auto* solve = app.add_subcommand("solve", "Backward induction");
    solve->add_option("model", model_path)->required();
    solve->add_option("-H,--horizon", horizon)->required();
    solve->add_option("--terminal", terminal_path);

    // pips-sync
    auto* sync = app.add_subcommand("pips-sync", "Synchronous policy iteration with switching");
    sync->add_option("model", model_path)->required();
    sync->add_option("-H,--horizon", horizon)->required();
    sync->add_option("--init", init_path);
    sync->add_option("--budget", budget);

    // pips-async
    std::string schedule_spec;
    std::uint64_t seed = 0;
    std::size_t max_steps = 100000;
    std::string report_path;
    auto* async = app.add_subcommand("pips-async", "Asynchronous off-line policy iteration");
    async->add_option("model", model_path)->required();
    async->add_option("-H,--horizon", horizon)->required();
    async->add_option("--schedule", schedule_spec)->required();
    async->add_option("--init", init_path);
    async->add_option("--budget", budget);
    async->add_option("--max-steps", max_steps);
    async->add_option("--seed", seed);
    async->add_option("--report", report_path);

    // online
    std::size_t steps = 0;
    std::string supervisor_name = "null";
    std::string trace_path;
    State start = 0;
    std::size_t window = 0;
    bool no_early_stop = false;
    bool unguarded = false;
    auto* online = app.add_subcommand("online", "Run the on-line rolling-horizon controller");
    online->add_option("model", model_path)->required();
    online->add_option("-H,--horizon", horizon)->required();
    online->add_option("--steps", steps)->required();
    online->add_option("--seed", seed);
    online->add_option("--supervisor", supervisor_name);
    online->add_option("--trace", trace_path);
    online->add_option("--start", start);
    online->add_option("--window", window);
    online->add_option("--init", init_path);
    online->add_option("--budget", budget);
    online->add_flag("--no-early-stop", no_early_stop);
    online->add_flag("--unguarded", unguarded, "Diagnostic: admit supervisor actions unchecked");

    // analyze
    std::string policy_path;
    bool exhaustive = false;
    std::size_t cap = kDefaultEnumerationCap;
    auto* analyze = app.add_subcommand("analyze", "Communicating classes and verdicts");
    analyze->add_option("model", model_path)->required();
    analyze->add_option("--policy", policy_path);
    analyze->add_flag("--exhaustive", exhaustive);
    analyze->add_option("--cap", cap);

    // errorbound
    std::size_t hmin = 1, hmax = 1;
    std::string csv_path;
    auto* errorbound = app.add_subcommand("errorbound", "Rolling-horizon error curve");
    errorbound->add_option("model", model_path)->required();
    errorbound->add_option("--hmin", hmin)->required();
    errorbound->add_option("--hmax", hmax)->required();
    errorbound->add_option("--terminal", terminal_path);
    errorbound->add_option("-o,--output", csv_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (validate->parsed()) {
            MdpModel m = io::model_from_json(io::parse_json(io::read_file(model_path), model_path));
            auto report = validate_model(m);
            if (!report.ok()) {
                err << report.to_string();
                return kExitDomain;
            }
            out << "valid: " << m.name() << " (" << m.num_states() << " states)\n";
            return kExitOk;
        }

        if (gen->parsed()) {
            io::save_model(generate_random_mdp(gen_cfg), gen_out);
            out << "wrote " << gen_out << "\n";
            return kExitOk;
        }

        const MdpModel model = io::load_model(model_path);

        if (solve->parsed()) {
            const auto sol = backward_induction(model, horizon, detail::terminal_row(terminal_path));
            out << "model: " << model.name() << "\nhorizon: " << horizon << "\n";
            detail::print_values(out, "V*", sol.values);
            detail::print_policy(out, "pi*", sol.policy);
            return kExitOk;
        }

        if (sync->parsed()) {
            const auto init = detail::initial_policy(model, horizon, init_path);
            const auto result = run_pips_sync(model, init, budget);
            out << "iterations: " << result.iterations << "\n";
            detail::print_values(out, "V", result.snapshots.back());
            detail::print_policy(out, "pi", result.policy);
            return kExitOk;
        }

        if (async->parsed()) {
            const auto init = detail::initial_policy(model, horizon, init_path);
            std::optional<StateSchedule> schedule;
            if (schedule_spec == "improvable") {
                schedule = StateSchedule::improvable_first();
            } else if (schedule_spec == "embedded") {
                schedule = StateSchedule::sequence(level_embedded_schedule(model, horizon, seed));
            } else if (schedule_spec.rfind("file:", 0) == 0) {
                schedule = StateSchedule::sequence(io::parse_schedule(io::read_file(schedule_spec.substr(5))));
            } else {
                err << "usage error: --schedule must be improvable, embedded or file:<path>\n";
                return kExitUsage;
            }
            const auto result = run_pips_async_offline(model, init, *schedule, budget, max_steps);
            out << "steps: " << result.steps << "\nupdates: " << result.reports.size()
                << "\nterminated: " << (result.terminated ? "yes" : "no") << "\n";
            detail::print_values(out, "V", evaluate_policy(model, result.policy));
            detail::print_policy(out, "pi", result.policy);
            if (!report_path.empty()) {
                std::ostringstream lines;
                for (const auto& r : result.reports) lines << io::report_to_json(r).dump() << "\n";
                io::write_file(report_path, lines.str());
            }
            return kExitOk;
        }

        if (online->parsed()) {
            const auto kind = parse_supervisor_kind(supervisor_name);
            if (!kind) {
                err << "usage error: unknown supervisor '" << supervisor_name << "'\n";
                return kExitUsage;
            }
            OnlineConfig cfg;
            cfg.horizon = horizon;
            cfg.max_steps = steps;
            cfg.initial_state = start;
            cfg.budget = budget;
            cfg.window = window;
            cfg.seed = seed;
            cfg.stop_when_stable = !no_early_stop;
            cfg.guard_suggestions = !unguarded;
            cfg.record_values = false;
            if (!init_path.empty()) cfg.initial_policy = detail::initial_policy(model, horizon, init_path);
            SupervisorParams params;
            params.seed = RngStream::splitmix64(seed ^ 0x5u);
            if (*kind == SupervisorKind::kOracle)
                params.oracle_policy = backward_induction(model, horizon).policy;
            const std::vector<Supervisor> sups{builtin_supervisor(*kind, params)};
            const auto trace = run_online(model, cfg, sups);

            out << "steps: " << trace.records.size() << "\n";
            out << "last change: " << trace.last_change_step << "\n";
            out << "K: " << (trace.stabilization_step ? std::to_string(*trace.stabilization_step) : "none")
                << "\n";
            out << "monotone: " << (trace.monotone ? "yes" : "no") << "\n";
            detail::print_policy(out, "lambda", trace.final_policy);
            const auto& local = *trace.local_optimality;
            out << "local optimality: " << to_string(local.verdict) << "\n";
            for (const auto& c : local.classes) {
                const bool ok = std::all_of(c.improvable_empty.begin(), c.improvable_empty.end(),
                                            [](bool b) { return b; });
                out << "  class " << detail::fmt_set(c.members)
                    << (c.recurrent ? " recurrent" : " transient")
                    << (ok ? " locally optimal" : " improvable") << "\n";
            }
            out << "globally optimal: " << (local.globally_optimal ? "yes" : "no") << "\n";
            if (!trace_path.empty()) {
                std::ostringstream lines;
                io::write_trace_jsonl(lines, trace);
                io::write_file(trace_path, lines.str());
            }
            return kExitOk;
        }

        if (analyze->parsed()) {
            if (!policy_path.empty()) {
                const auto phi = io::load_stationary_policy(policy_path);
                const auto part = communicating_classes(model, phi);
                out << "classes: " << part.size() << "\n";
                for (std::size_t c = 0; c < part.size(); ++c)
                    out << "  " << detail::fmt_set(part.classes[c])
                        << (part.recurrent[c] ? " recurrent" : " transient") << "\n";
            }
            const auto verdict = is_mdp_communicating(
                model, exhaustive ? CommunicatingMode::kExhaustive : CommunicatingMode::kSufficient, cap);
            out << "communicating: " << to_string(verdict.verdict)
                << (exhaustive ? " (exhaustive)" : " (sufficient condition)") << "\n";
            if (verdict.witness) out << "witness: " << io::fmt_row(*verdict.witness) << "\n";
            return kExitOk;
        }

        if (errorbound->parsed()) {
            if (hmin == 0 || hmax < hmin)
                throw PreconditionError("errorbound needs 1 <= hmin <= hmax");
            std::vector<std::size_t> hs(hmax - hmin + 1);
            std::iota(hs.begin(), hs.end(), hmin);
            const auto rows = rolling_horizon_error(model, hs, detail::terminal_row(terminal_path));
            std::ostringstream csv;
            io::write_error_csv(csv, rows);
            if (csv_path.empty())
                out << csv.str();
            else
                io::write_file(csv_path, csv.str());
            return kExitOk;
        }
    } catch (const io::ValidationError& e) {
        err << e.what();
        return kExitDomain;
    } catch (const io::IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const PreconditionError& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomain;
    }
    return kExitUsage;
}

} // namespace pips::cli
