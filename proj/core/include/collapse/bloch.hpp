#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "collapse/core.hpp"

namespace collapse {

/// Per-qubit Bloch coordinates of N monitored qubits plus the qubit
/// Hamiltonian H_j = (E/2) sigma_z + (Delta/2) sigma_x and the detector
/// measurement time tau_m.
///
/// Convention: excited <-> sigma_z eigenvalue +1, so z_j = 2|c_j|^2 - 1 = V_j - 1.
/// A single-excitation state with x = y = 0 therefore has sum_j z_j = 2 - N.
struct BlochEnsemble {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> z;
    double energy = 0.0;
    double tunneling = 0.0;
    double tau_m = 1.0;
    /// Number of radial projections applied so far.
    std::size_t purity_repairs = 0;

    std::size_t size() const { return z.size(); }

    /// True when every x_j and y_j is exactly zero.
    bool is_diagonal() const;

    /// Throws std::invalid_argument on mismatched sizes, tau_m <= 0 or a
    /// Bloch vector longer than 1 + 1e-9.
    void validate() const;
};

/// Reduced single-qubit states of a single-excitation state with
/// populations V (so z_j = V_j - 1, x_j = y_j = 0).
BlochEnsemble bloch_from_state(const StateVector& state, double energy = 0.0,
                               double tunneling = 0.0, double tau_m = 1.0);

/// <sigma_z^(i) sigma_z^(j)> = -z_i - z_j - 1 in the single-excitation subspace.
/// Throws std::invalid_argument if i == j or an index is out of range.
double correlation_zz(std::span<const double> z, std::size_t i, std::size_t j);

/// Euler-Maruyama update of all 3N coordinates, with the x-z and y-z
/// anticommutator correlators set to zero and the z-z correlator replaced by
/// its single-excitation closed form:
///
///   dz_j = Delta y_j dt + [(1 - z_j^2) dW_j - sum_{i != j} (1 + z_i)(1 + z_j) dW_i] / sqrt(tau_m)
///   dx_j = -E y_j dt - x_j dt / (2 tau_m) - x_j sum_i z_i dW_i / sqrt(tau_m)
///   dy_j =  E x_j dt - Delta z_j dt - y_j dt / (2 tau_m) - y_j sum_i z_i dW_i / sqrt(tau_m)
///
/// with dW = sqrt(dt) * noise. A Bloch vector pushed outside the unit ball is
/// projected back radially. When the ensemble is diagonal and a projection
/// fired, the populations 1 + z are renormalized to total 2 with the same
/// rule the V-coordinate integrator uses.
BlochEnsemble step_bloch(const BlochEnsemble& state, std::span<const double> noise, double dt);

/// In-place form of `step_bloch`. `scratch` is resized as needed.
void step_bloch_inplace(BlochEnsemble& state, std::span<const double> noise, double dt,
                        std::vector<double>& scratch);

/// P_j = x_j^2 + y_j^2 + z_j^2.
double purity(const BlochEnsemble& state, std::size_t j);

/// Ito average of the one-step purity change:
///   [(1 - P_j)(1 - z_j^2) + (1 + z_j)^2 sum_{i != j} (1 + z_i)^2
///    + (P_j - z_j^2) sum_{i != j} z_i^2] * dt / tau_m.
double expected_purity_increment(const BlochEnsemble& state, std::size_t j, double dt);

struct PurityTraceOptions {
    NoiseKind noise_kind = NoiseKind::Normal;
    double dt = 1e-2;
    std::uint64_t steps = 100;
    /// Record every k-th step (step 0 always included).
    std::uint64_t sample_every = 10;
    std::uint64_t realizations = 1000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Ensemble moments of one qubit at one sample time.
struct PurityTraceRow {
    std::uint64_t step = 0;
    double t = 0.0;
    std::size_t qubit = 0;
    double mean_purity = 0.0;
    double stderr_purity = 0.0;
    /// P(t) minus P at the previous sample time (zero on the first row).
    double mean_window_change = 0.0;
    double stderr_window_change = 0.0;
    /// One-step change P(t + dt) - P(t), and the Ito average predicted at t.
    double mean_step_change = 0.0;
    double mean_expected_change = 0.0;
    /// Per-trajectory (observed - predicted) one-step change.
    double mean_change_residual = 0.0;
    double stderr_change_residual = 0.0;
};

/// Evolves `options.realizations` copies of `initial` (trajectory i uses
/// derive_stream(seed, i)) and reports per-qubit purity statistics at each
/// sample time. Rows are ordered by step, then qubit.
std::vector<PurityTraceRow> purity_trace(const BlochEnsemble& initial,
                                         const PurityTraceOptions& options);

/// Drives the Bloch integrator and the V-coordinate integrator with the same
/// noise for `steps` steps from `initial` (E = Delta = 0, tau_m = 1) and
/// returns max over steps and sites of |(1 + z_j) - V_j|.
double twin_run_max_deviation(const StateVector& initial, NoiseKind kind, double dt,
                              std::uint64_t steps, RandomStream& stream);

}  // namespace collapse
