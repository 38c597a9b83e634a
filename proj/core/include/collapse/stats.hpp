#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "collapse/core.hpp"

namespace collapse {

/// Streaming mean/variance with an exact-order merge.
struct RunningMoments {
    std::uint64_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x);
    void merge(const RunningMoments& other);
    double variance() const;
    double stderr_of_mean() const;
};

struct CollapseStats {
    std::size_t n_sites = 0;
    std::uint64_t realizations = 0;
    /// Mean over collapsed trajectories only.
    double mean_time = 0.0;
    double stderr_time = 0.0;
    std::vector<std::uint64_t> winner_histogram;
    std::uint64_t horizon_exceeded = 0;

    /// False when more than 1% of the runs hit the horizon.
    bool valid_for_fit() const;
};

/// Runs `m` trajectories; trajectory i uses derive_stream(params.master_seed, i).
/// Horizon exceedances are counted, not thrown.
CollapseStats run_ensemble(const SimParams& params, std::uint64_t m, const StateVector& initial,
                           unsigned threads = 1);

struct SweepRow {
    std::size_t n_sites = 0;
    CollapseStats stats;
};

using SweepTable = std::vector<SweepRow>;

/// Master seed used for the row with N sites in a sweep.
std::uint64_t sweep_row_seed(std::uint64_t master_seed, std::size_t n_sites);

/// One uniform-start ensemble per N. `n_list` must be nonempty and strictly
/// increasing.
SweepTable scaling_sweep(std::span<const std::size_t> n_list, const SimParams& base,
                         std::uint64_t m, unsigned threads = 1);

/// Least-squares fit T = slope * ln ln N + intercept.
struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    /// Zero when the times have no spread.
    double r_squared = 0.0;
    /// Classical OLS standard error of the slope (residual based).
    double slope_stderr = 0.0;
    std::size_t rows_used = 0;
};

/// Uses rows with N >= n_min that are valid_for_fit. Throws
/// std::invalid_argument if n_min < 3 or fewer than 3 rows qualify.
FitResult fit_lnln(const SweepTable& table, std::size_t n_min = 4);

/// Plain OLS of y on x; exposed for callers that fit other regressors.
FitResult fit_linear(std::span<const double> x, std::span<const double> y);

struct CorrelationRow {
    double t = 0.0;
    /// E[V_n V_k] averaged over all pairs n != k.
    double mean_pair = 0.0;
    double mean_pair_stderr = 0.0;
    /// Pair with the largest estimated E[V_n V_k].
    std::size_t max_pair_n = 0;
    std::size_t max_pair_k = 0;
    double max_pair = 0.0;
    double max_pair_stderr = 0.0;
    /// 4 / (4t + (N - 1)^2).
    double bound = 0.0;
    /// (bound - mean_pair) / mean_pair_stderr; +inf when the stderr is zero.
    double margin_in_stderr = 0.0;
    /// mean_pair <= bound + 3 stderr.
    bool satisfied = false;
};

double pair_correlation_bound(std::size_t n_sites, double t);

/// Runs `m` uniform-start trajectories through the whole grid (no stopping at
/// collapse) and estimates E[V_n V_k] at each grid time. Needs N >= 2.
std::vector<CorrelationRow> correlation_bound_check(const SimParams& params, std::uint64_t m,
                                                    std::span<const double> t_grid,
                                                    unsigned threads = 1);

struct InitialStepRow {
    std::size_t n_sites = 0;
    /// Mean over runs of max_{t <= horizon} V_1(t) - V_1(0).
    double mean_running_max = 0.0;
    double stderr_running_max = 0.0;
    std::uint64_t realizations = 0;
};

/// Running maximum of the first coordinate up to `horizon` for each N.
/// Rejects params.dt > horizon.
std::vector<InitialStepRow> initial_step_experiment(std::span<const std::size_t> n_list,
                                                    const SimParams& params, std::uint64_t m,
                                                    double horizon = 1.0, unsigned threads = 1);

}  // namespace collapse
