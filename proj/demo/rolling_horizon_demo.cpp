// Runs the on-line controller on a random communicating model and compares
// the policy it settles on with the off-line backward-induction solution.

#include "pips/io.hpp"
#include "pips/pips.hpp"

#include <iostream>

int main() {
    using namespace pips;

    GenConfig gen;
    gen.num_states = 6;
    gen.num_actions = 3;
    gen.ensure_positive = true;
    gen.gamma = 0.9;
    gen.seed = 2024;
    const MdpModel model = generate_random_mdp(gen);

    const std::size_t horizon = 4;
    const auto optimal = backward_induction(model, horizon);

    OnlineConfig cfg;
    cfg.horizon = horizon;
    cfg.max_steps = 2000;
    cfg.seed = 7;
    const std::vector<Supervisor> sups{builtin_supervisor(SupervisorKind::kRandom, {11, {}})};
    const auto trace = run_online(model, cfg, sups);

    const auto reached = evaluate_policy(model, trace.final_policy);
    std::cout << "steps run:        " << trace.records.size() << "\n";
    std::cout << "last change at:   " << trace.last_change_step << "\n";
    std::cout << "V_H on-line:      " << io::fmt_row(reached.top()) << "\n";
    std::cout << "V*_H off-line:    " << io::fmt_row(optimal.values.top()) << "\n";
    std::cout << "max difference:   " << io::fmt(max_abs_difference(reached, optimal.values)) << "\n";
    std::cout << "local optimality: " << to_string(trace.local_optimality->verdict) << "\n";
}
