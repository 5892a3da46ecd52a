#include "crl/queue.hpp"

#include <algorithm>
#include <cmath>

namespace crl {

std::string_view to_string(ActionMode mode) {
    return mode == ActionMode::Product ? "product" : "paired";
}

ActionMode parse_action_mode(std::string_view text) {
    if (text == "product") return ActionMode::Product;
    if (text == "paired") return ActionMode::Paired;
    throw ModelError("action_mode must be \"product\" or \"paired\", got \"" + std::string(text) + "\"");
}

void QueueConfig::validate() const {
    if (buffer < 1) throw ModelError("queue.L must be at least 1");
    if (service_levels.empty()) throw ModelError("queue.service_levels must not be empty");
    if (flow_levels.empty()) throw ModelError("queue.flow_levels must not be empty");
    for (double a : service_levels)
        if (!(a > 0.0 && a < 1.0)) throw ModelError("queue.service_levels must lie in (0, 1)");
    for (double b : flow_levels)
        if (!(b >= 0.0 && b < 1.0)) throw ModelError("queue.flow_levels must lie in [0, 1)");
    if (std::find(flow_levels.begin(), flow_levels.end(), 0.0) == flow_levels.end())
        throw ModelError("queue.flow_levels must contain 0");
    if (action_mode == ActionMode::Paired && service_levels.size() != flow_levels.size())
        throw ModelError("paired action mode needs equally many service and flow levels");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ModelError("queue.gamma must lie in (0, 1)");
    if (!std::isfinite(h1) || !std::isfinite(h2)) throw ModelError("queue thresholds must be finite");
}

std::vector<QueueAction> queue_actions(const QueueConfig& config) {
    std::vector<QueueAction> actions;
    if (config.action_mode == ActionMode::Product) {
        for (double a : config.service_levels)
            for (double b : config.flow_levels) actions.push_back({a, b});
    } else {
        for (std::size_t k = 0; k < config.service_levels.size(); ++k)
            actions.push_back({config.service_levels[k], config.flow_levels[k]});
    }
    return actions;
}

Vec queue_transition_row(const QueueConfig& config, std::size_t x, QueueAction action) {
    const std::size_t top = config.buffer;
    const double a = action.service;
    const double b = x == top ? 0.0 : action.flow;  // no arrivals into a full buffer
    Vec row(top + 1, 0.0);
    if (x == 0) {
        row[1] = (1.0 - a) * b;
        row[0] = 1.0 - row[1];
        return row;
    }
    const double down = a * (1.0 - b);
    const double up = x < top ? (1.0 - a) * b : 0.0;
    row[x - 1] = down;
    if (x < top) row[x + 1] = up;
    row[x] = a * b + (1.0 - a) * (1.0 - b);
    return row;
}

CmdpModel build_queue_cmdp(const QueueConfig& config) {
    config.validate();
    const std::vector<QueueAction> actions = queue_actions(config);
    const std::size_t ns = config.buffer + 1;
    const std::size_t na = actions.size();
    const QueueRewardShape& f = config.shape;

    std::vector<std::vector<Vec>> transition(na, std::vector<Vec>(ns));
    std::vector<Vec> reward(ns, Vec(na));
    std::vector<std::vector<Vec>> g(2, std::vector<Vec>(ns, Vec(na)));
    for (std::size_t k = 0; k < na; ++k) {
        for (std::size_t x = 0; x < ns; ++x) {
            const double b = x == config.buffer ? 0.0 : actions[k].flow;
            transition[k][x] = queue_transition_row(config, x, actions[k]);
            reward[x][k] = f.r_slope * static_cast<double>(x) + f.r_intercept;
            g[0][x][k] = f.g1_slope * actions[k].service + f.g1_intercept;
            g[1][x][k] = f.g2_slope * b + f.g2_intercept;
        }
    }
    return CmdpModel(std::move(transition), std::move(reward), std::move(g), {config.h1, config.h2}, config.gamma,
                     Vec(ns, 1.0 / static_cast<double>(ns)));
}

ModelSampler queue_generative_model(const QueueConfig& config) { return ModelSampler(build_queue_cmdp(config)); }

}  // namespace crl
