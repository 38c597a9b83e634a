#pragma once

#include <optional>
#include <span>
#include <vector>

#include "collapse/core.hpp"

namespace collapse {

/// Diffusion increment of the collapse SDE in V-coordinates,
///
///   dV_n = V_n (2 - V_n) dW_n - sum_{k != n} V_n V_k dW_k,
///
/// evaluated in the grouped form dV_n = V_n (2 dW_n - S), S = sum_k V_k dW_k.
/// `dw` holds the Wiener increments (noise already scaled by sqrt(dt)).
std::vector<double> increment(const StateVector& state, std::span<const double> dw);

/// Same as `increment` on a raw buffer; `out` must have the size of `v`.
void increment_into(std::span<const double> v, std::span<const double> dw, std::span<double> out);

/// One Euler-Maruyama step followed by simplex repair.
StateVector euler_step(const StateVector& state, std::span<const double> noise, double dt);

/// In-place variant used by the trajectory loops. `scratch` is resized as
/// needed. Returns whether the boundary repair fired.
bool euler_step_inplace(std::span<double> v, std::span<const double> noise, double dt,
                        std::vector<double>& scratch);

/// First index with V_n >= 2 - delta (lowest index wins ties).
std::optional<std::size_t> detect_collapse(std::span<const double> v, double delta);

inline std::optional<std::size_t> detect_collapse(const StateVector& state, double delta) {
    return detect_collapse(state.values(), delta);
}

/// Steps from `initial` until a site collapses or the horizon is exceeded.
/// Each step consumes N noise draws from `stream`, in site order.
TrajectoryResult run_trajectory(const SimParams& params, RandomStream& stream,
                                const StateVector& initial);

/// Number of Euler steps that fit into `horizon` at step size `dt`.
std::uint64_t steps_for(double horizon, double dt);

}  // namespace collapse
