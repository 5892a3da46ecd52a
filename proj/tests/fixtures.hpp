#pragma once

#include "crl/cmdp.hpp"
#include "crl/queue.hpp"

#include <algorithm>
#include <cmath>

namespace fixture {

using crl::Vec;

inline crl::CmdpModel single_state(double reward = 1.0, double gamma = 0.5) {
    return crl::CmdpModel({{{1.0}}}, {{reward}}, {}, {}, gamma, {1.0});
}

// Two states; action 0 stays put, action 1 swaps.
inline crl::CmdpModel two_state_chain(double gamma = 0.5) {
    return crl::CmdpModel({{{1.0, 0.0}, {0.0, 1.0}}, {{0.0, 1.0}, {1.0, 0.0}}}, {{1.0, 0.0}, {0.0, 0.5}}, {}, {}, gamma,
                          {1.0, 0.0});
}

inline crl::CmdpModel queue() { return crl::build_queue_cmdp(crl::QueueConfig{}); }

inline double max_abs_diff(const Vec& a, const Vec& b) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
    return worst;
}

}  // namespace fixture
