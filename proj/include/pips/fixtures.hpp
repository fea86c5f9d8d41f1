#pragma once

#include "pips/mdp.hpp"

namespace pips::fixtures {

inline constexpr Action kStay = 0;
inline constexpr Action kToggle = 1;

/**
 * Two states, actions {stay, toggle}. Stay keeps the state, toggle swaps it.
 * R(0,stay)=0, R(0,toggle)=1, R(1,stay)=2, R(1,toggle)=0, gamma=0.5.
 */
inline MdpModel toggle2() {
    return MdpModel("toggle2", 0.5, 2, {2, 2}, {{0.0, 1.0}, {2.0, 0.0}},
                    {{{1.0, 0.0}, {0.0, 1.0}}, {{0.0, 1.0}, {1.0, 0.0}}});
}

} // namespace pips::fixtures
