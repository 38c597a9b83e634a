#include "collapse/sde.hpp"

#include <cmath>
#include <stdexcept>

namespace collapse {

void increment_into(std::span<const double> v, std::span<const double> dw, std::span<double> out) {
    if (dw.size() != v.size() || out.size() != v.size()) {
        throw std::invalid_argument("increment: noise and state sizes differ");
    }
    double s = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        s += v[k] * dw[k];
    }
    for (std::size_t n = 0; n < v.size(); ++n) {
        out[n] = v[n] * (2.0 * dw[n] - s);
    }
}

std::vector<double> increment(const StateVector& state, std::span<const double> dw) {
    std::vector<double> out(state.size());
    increment_into(state.values(), dw, out);
    return out;
}

bool euler_step_inplace(std::span<double> v, std::span<const double> noise, double dt,
                        std::vector<double>& scratch) {
    const std::size_t n = v.size();
    if (noise.size() != n) {
        throw std::invalid_argument("euler_step: noise and state sizes differ");
    }
    scratch.resize(2 * n);
    std::span<double> dw(scratch.data(), n);
    std::span<double> dv(scratch.data() + n, n);
    const double sqrt_dt = std::sqrt(dt);
    for (std::size_t i = 0; i < n; ++i) {
        dw[i] = sqrt_dt * noise[i];
    }
    increment_into(v, dw, dv);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] += dv[i];
    }
    return repair_simplex(v);
}

StateVector euler_step(const StateVector& state, std::span<const double> noise, double dt) {
    if (!(dt > 0.0)) {
        throw std::invalid_argument("euler_step: dt must be positive");
    }
    std::vector<double> v(state.values().begin(), state.values().end());
    std::vector<double> scratch;
    euler_step_inplace(v, noise, dt, scratch);
    return StateVector(std::move(v));
}

std::optional<std::size_t> detect_collapse(std::span<const double> v, double delta) {
    const double threshold = kSimplexTotal - delta;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] >= threshold) {
            return i;
        }
    }
    return std::nullopt;
}

std::uint64_t steps_for(double horizon, double dt) {
    // The epsilon keeps e.g. 1.0 / 0.04 from rounding down to 24.
    return static_cast<std::uint64_t>(std::floor(horizon / dt + 1e-9));
}

TrajectoryResult run_trajectory(const SimParams& params, RandomStream& stream,
                                const StateVector& initial) {
    params.validate();
    if (initial.size() != params.n_sites) {
        throw std::invalid_argument("run_trajectory: initial state has wrong number of sites");
    }
    const std::size_t n = params.n_sites;
    const std::uint64_t max_steps = steps_for(params.horizon(), params.dt);

    TrajectoryResult result;
    std::vector<double> v(initial.values().begin(), initial.values().end());
    std::vector<double> noise(n);
    std::vector<double> scratch;

    auto record = [&](std::uint64_t step) {
        result.path.push_back({static_cast<double>(step) * params.dt, v});
    };
    if (params.record_path) {
        record(0);
    }

    std::uint64_t step = 0;
    std::optional<std::size_t> winner = detect_collapse(v, params.delta);
    while (!winner && step < max_steps) {
        fill_noise(params.noise_kind, stream, noise);
        euler_step_inplace(v, noise, params.dt, scratch);
        ++step;
        winner = detect_collapse(v, params.delta);
        if (params.record_path && (step % params.path_stride == 0 || winner || step == max_steps)) {
            record(step);
        }
    }

    result.steps_taken = step;
    if (winner) {
        result.winner = winner;
        result.collapse_time = static_cast<double>(step) * params.dt;
    }
    return result;
}

}  // namespace collapse
