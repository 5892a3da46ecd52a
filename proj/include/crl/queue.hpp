#pragma once

#include "crl/cmdp.hpp"
#include "crl/sgda.hpp"

#include <cstddef>
#include <string_view>
#include <vector>

namespace crl {

enum class ActionMode { Product, Paired };

std::string_view to_string(ActionMode mode);
ActionMode parse_action_mode(std::string_view text);

/// Linear shapes r(s) = r_slope s + r_intercept, g1(a) = g1_slope a + g1_intercept,
/// g2(b) = g2_slope b + g2_intercept.
struct QueueRewardShape {
    double r_slope = -1.0;
    double r_intercept = 5.0;
    double g1_slope = -10.0;
    double g1_intercept = 3.0;
    double g2_slope = 10.0;
    double g2_intercept = -3.0;
};

/**
 * Single-server queue with a buffer of size L, service-success probabilities
 * and arrival probabilities chosen every slot. States are 0..L.
 */
struct QueueConfig {
    std::size_t buffer = 4;
    Vec service_levels{0.2, 0.3, 0.5, 0.6, 0.8};
    Vec flow_levels{0.1, 0.3, 0.5, 0.9, 0.0};
    QueueRewardShape shape;
    double h1 = 0.0;
    double h2 = 0.0;
    double gamma = 0.9;
    ActionMode action_mode = ActionMode::Product;

    /// Throws ModelError when a level range or the action pairing is invalid.
    void validate() const;
};

/// Composite action (service a, arrival b) before the full-buffer remap.
struct QueueAction {
    double service = 0.0;
    double flow = 0.0;
};

/// Product mode enumerates service-major: index = i_service * |B| + i_flow.
std::vector<QueueAction> queue_actions(const QueueConfig& config);

/// Three-point law P(. | x, (a, b)); b is forced to 0 when x = L.
Vec queue_transition_row(const QueueConfig& config, std::size_t x, QueueAction action);

CmdpModel build_queue_cmdp(const QueueConfig& config);

ModelSampler queue_generative_model(const QueueConfig& config);

}  // namespace crl
