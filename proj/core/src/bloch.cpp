#include "collapse/bloch.hpp"

#include "collapse/parallel.hpp"
#include "collapse/sde.hpp"
#include "collapse/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace collapse {

namespace {

constexpr double kPurityTolerance = 1e-9;

void check_index(const BlochEnsemble& state, std::size_t j) {
    if (j >= state.size()) {
        throw std::invalid_argument("qubit index " + std::to_string(j) + " out of range");
    }
}

}  // namespace

bool BlochEnsemble::is_diagonal() const {
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (x[j] != 0.0 || y[j] != 0.0) {
            return false;
        }
    }
    return true;
}

void BlochEnsemble::validate() const {
    if (z.empty() || x.size() != z.size() || y.size() != z.size()) {
        throw std::invalid_argument("BlochEnsemble: x, y, z must be nonempty and equally sized");
    }
    if (!(tau_m > 0.0)) {
        throw std::invalid_argument("BlochEnsemble: tau_m must be positive");
    }
    for (std::size_t j = 0; j < z.size(); ++j) {
        if (!(x[j] * x[j] + y[j] * y[j] + z[j] * z[j] <= 1.0 + kPurityTolerance)) {
            throw std::invalid_argument("BlochEnsemble: Bloch vector outside the unit ball");
        }
    }
}

BlochEnsemble bloch_from_state(const StateVector& state, double energy, double tunneling,
                               double tau_m) {
    BlochEnsemble out;
    const std::size_t n = state.size();
    out.x.assign(n, 0.0);
    out.y.assign(n, 0.0);
    out.z.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        out.z[j] = state.u3(j);
    }
    out.energy = energy;
    out.tunneling = tunneling;
    out.tau_m = tau_m;
    out.validate();
    return out;
}

double correlation_zz(std::span<const double> z, std::size_t i, std::size_t j) {
    if (i == j) {
        throw std::invalid_argument("correlation_zz: indices must differ");
    }
    if (i >= z.size() || j >= z.size()) {
        throw std::invalid_argument("correlation_zz: index out of range");
    }
    return -z[i] - z[j] - 1.0;
}

void step_bloch_inplace(BlochEnsemble& state, std::span<const double> noise, double dt,
                        std::vector<double>& scratch) {
    const std::size_t n = state.size();
    if (noise.size() != n) {
        throw std::invalid_argument("step_bloch: noise and state sizes differ");
    }
    if (!(dt > 0.0)) {
        throw std::invalid_argument("step_bloch: dt must be positive");
    }
    scratch.resize(n);
    std::span<double> dw(scratch.data(), n);
    const double sqrt_dt = std::sqrt(dt);
    const double inv_sqrt_tau = 1.0 / std::sqrt(state.tau_m);
    const double dephasing = dt / (2.0 * state.tau_m);
    const double e = state.energy;
    const double delta = state.tunneling;

    double excited_weighted = 0.0;  // sum_i (1 + z_i) dW_i
    double z_weighted = 0.0;        // sum_i z_i dW_i
    for (std::size_t i = 0; i < n; ++i) {
        dw[i] = sqrt_dt * noise[i];
        excited_weighted += (1.0 + state.z[i]) * dw[i];
        z_weighted += state.z[i] * dw[i];
    }

    for (std::size_t j = 0; j < n; ++j) {
        const double xj = state.x[j];
        const double yj = state.y[j];
        const double zj = state.z[j];
        const double others = excited_weighted - (1.0 + zj) * dw[j];
        const double dz = delta * yj * dt +
                          inv_sqrt_tau * ((1.0 - zj * zj) * dw[j] - (1.0 + zj) * others);
        const double dx = -e * yj * dt - xj * dephasing - inv_sqrt_tau * xj * z_weighted;
        const double dy = e * xj * dt - delta * zj * dt - yj * dephasing -
                          inv_sqrt_tau * yj * z_weighted;
        state.x[j] = xj + dx;
        state.y[j] = yj + dy;
        state.z[j] = zj + dz;
    }

    bool projected = false;
    for (std::size_t j = 0; j < n; ++j) {
        const double p = state.x[j] * state.x[j] + state.y[j] * state.y[j] +
                         state.z[j] * state.z[j];
        if (p > 1.0) {
            projected = true;
            ++state.purity_repairs;
            if (state.x[j] == 0.0 && state.y[j] == 0.0) {
                state.z[j] = state.z[j] > 0.0 ? 1.0 : -1.0;
            } else {
                const double scale = 1.0 / std::sqrt(p);
                state.x[j] *= scale;
                state.y[j] *= scale;
                state.z[j] *= scale;
            }
        }
    }

    if (projected && state.is_diagonal()) {
        std::vector<double> populations(n);
        for (std::size_t j = 0; j < n; ++j) {
            populations[j] = 1.0 + state.z[j];
        }
        renormalize_simplex(populations);
        for (std::size_t j = 0; j < n; ++j) {
            state.z[j] = populations[j] - 1.0;
        }
    }
}

BlochEnsemble step_bloch(const BlochEnsemble& state, std::span<const double> noise, double dt) {
    BlochEnsemble next = state;
    std::vector<double> scratch;
    step_bloch_inplace(next, noise, dt, scratch);
    return next;
}

double purity(const BlochEnsemble& state, std::size_t j) {
    check_index(state, j);
    return state.x[j] * state.x[j] + state.y[j] * state.y[j] + state.z[j] * state.z[j];
}

double expected_purity_increment(const BlochEnsemble& state, std::size_t j, double dt) {
    check_index(state, j);
    const double p = purity(state, j);
    const double zj = state.z[j];
    double excited_sq = 0.0;
    double z_sq = 0.0;
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (i == j) {
            continue;
        }
        excited_sq += (1.0 + state.z[i]) * (1.0 + state.z[i]);
        z_sq += state.z[i] * state.z[i];
    }
    const double rate = (1.0 - p) * (1.0 - zj * zj) + (1.0 + zj) * (1.0 + zj) * excited_sq +
                        (p - zj * zj) * z_sq;
    return rate * dt / state.tau_m;
}

std::vector<PurityTraceRow> purity_trace(const BlochEnsemble& initial,
                                         const PurityTraceOptions& options) {
    initial.validate();
    if (options.realizations < 2 || options.sample_every < 1 || !(options.dt > 0.0)) {
        throw std::invalid_argument("purity_trace: need >= 2 realizations, sample_every >= 1, dt > 0");
    }
    const std::size_t n = initial.size();
    std::vector<std::uint64_t> sample_steps;
    for (std::uint64_t s = 0; s <= options.steps; s += options.sample_every) {
        sample_steps.push_back(s);
    }
    const std::size_t samples = sample_steps.size();

    struct Slot {
        RunningMoments purity;
        RunningMoments window;
        RunningMoments step_change;
        RunningMoments expected;
        RunningMoments residual;
    };
    using Tally = std::vector<Slot>;  // samples * n, sample-major

    auto block = [&](std::uint64_t begin, std::uint64_t end) {
        Tally tally(samples * n);
        std::vector<double> noise(n);
        std::vector<double> scratch;
        std::vector<double> previous(n);
        for (std::uint64_t i = begin; i < end; ++i) {
            RandomStream stream = derive_stream(options.seed, i);
            BlochEnsemble state = initial;
            std::size_t next_sample = 0;
            for (std::uint64_t step = 0; next_sample < samples; ++step) {
                fill_noise(options.noise_kind, stream, noise);
                if (step != sample_steps[next_sample]) {
                    step_bloch_inplace(state, noise, options.dt, scratch);
                    continue;
                }
                std::vector<double> before(n);
                std::vector<double> expected(n);
                for (std::size_t j = 0; j < n; ++j) {
                    before[j] = purity(state, j);
                    expected[j] = expected_purity_increment(state, j, options.dt);
                }
                step_bloch_inplace(state, noise, options.dt, scratch);
                for (std::size_t j = 0; j < n; ++j) {
                    Slot& slot = tally[next_sample * n + j];
                    const double observed = purity(state, j) - before[j];
                    slot.purity.add(before[j]);
                    slot.window.add(next_sample == 0 ? 0.0 : before[j] - previous[j]);
                    slot.step_change.add(observed);
                    slot.expected.add(expected[j]);
                    slot.residual.add(observed - expected[j]);
                    previous[j] = before[j];
                }
                ++next_sample;
            }
        }
        return tally;
    };
    auto combine = [](Tally& acc, Tally&& part) {
        for (std::size_t k = 0; k < acc.size(); ++k) {
            acc[k].purity.merge(part[k].purity);
            acc[k].window.merge(part[k].window);
            acc[k].step_change.merge(part[k].step_change);
            acc[k].expected.merge(part[k].expected);
            acc[k].residual.merge(part[k].residual);
        }
    };
    const Tally total =
        ordered_block_reduce(options.realizations, options.threads, Tally(samples * n), block, combine);

    std::vector<PurityTraceRow> rows;
    rows.reserve(samples * n);
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t j = 0; j < n; ++j) {
            const Slot& slot = total[s * n + j];
            PurityTraceRow row;
            row.step = sample_steps[s];
            row.t = static_cast<double>(sample_steps[s]) * options.dt;
            row.qubit = j;
            row.mean_purity = slot.purity.mean;
            row.stderr_purity = slot.purity.stderr_of_mean();
            row.mean_window_change = slot.window.mean;
            row.stderr_window_change = slot.window.stderr_of_mean();
            row.mean_step_change = slot.step_change.mean;
            row.mean_expected_change = slot.expected.mean;
            row.mean_change_residual = slot.residual.mean;
            row.stderr_change_residual = slot.residual.stderr_of_mean();
            rows.push_back(row);
        }
    }
    return rows;
}

double twin_run_max_deviation(const StateVector& initial, NoiseKind kind, double dt,
                              std::uint64_t steps, RandomStream& stream) {
    const std::size_t n = initial.size();
    std::vector<double> v(initial.values().begin(), initial.values().end());
    BlochEnsemble bloch = bloch_from_state(initial);
    std::vector<double> noise(n);
    std::vector<double> sde_scratch;
    std::vector<double> bloch_scratch;
    double worst = 0.0;
    for (std::uint64_t step = 0; step < steps; ++step) {
        fill_noise(kind, stream, noise);
        euler_step_inplace(v, noise, dt, sde_scratch);
        step_bloch_inplace(bloch, noise, dt, bloch_scratch);
        for (std::size_t j = 0; j < n; ++j) {
            worst = std::max(worst, std::abs((1.0 + bloch.z[j]) - v[j]));
        }
    }
    return worst;
}

}  // namespace collapse
