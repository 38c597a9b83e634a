#include "collapse/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "collapse/parallel.hpp"
#include "collapse/sde.hpp"

namespace collapse {

void RunningMoments::add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
}

void RunningMoments::merge(const RunningMoments& other) {
    if (other.count == 0) {
        return;
    }
    if (count == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(count);
    const double nb = static_cast<double>(other.count);
    const double n = na + nb;
    const double d = other.mean - mean;
    mean += d * nb / n;
    m2 += other.m2 + d * d * na * nb / n;
    count += other.count;
}

double RunningMoments::variance() const {
    return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0;
}

double RunningMoments::stderr_of_mean() const {
    return count > 1 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
}

bool CollapseStats::valid_for_fit() const {
    return static_cast<double>(horizon_exceeded) <= 0.01 * static_cast<double>(realizations);
}

CollapseStats run_ensemble(const SimParams& params, std::uint64_t m, const StateVector& initial,
                           unsigned threads) {
    params.validate();
    if (m < 1) {
        throw std::invalid_argument("run_ensemble: need at least one realization");
    }
    if (initial.size() != params.n_sites) {
        throw std::invalid_argument("run_ensemble: initial state has wrong number of sites");
    }
    SimParams quiet = params;
    quiet.record_path = false;

    struct Tally {
        RunningMoments times;
        std::vector<std::uint64_t> winners;
        std::uint64_t exceeded = 0;
    };
    const std::size_t n = params.n_sites;

    auto block = [&](std::uint64_t begin, std::uint64_t end) {
        Tally tally{{}, std::vector<std::uint64_t>(n, 0), 0};
        for (std::uint64_t i = begin; i < end; ++i) {
            RandomStream stream = derive_stream(params.master_seed, i);
            const TrajectoryResult r = run_trajectory(quiet, stream, initial);
            if (r.collapsed()) {
                tally.times.add(*r.collapse_time);
                ++tally.winners[*r.winner];
            } else {
                ++tally.exceeded;
            }
        }
        return tally;
    };
    auto combine = [](Tally& acc, Tally&& part) {
        acc.times.merge(part.times);
        for (std::size_t k = 0; k < acc.winners.size(); ++k) {
            acc.winners[k] += part.winners[k];
        }
        acc.exceeded += part.exceeded;
    };
    Tally total = ordered_block_reduce(m, threads, Tally{{}, std::vector<std::uint64_t>(n, 0), 0},
                                       block, combine);

    CollapseStats stats;
    stats.n_sites = n;
    stats.realizations = m;
    stats.mean_time = total.times.mean;
    stats.stderr_time = total.times.stderr_of_mean();
    stats.winner_histogram = std::move(total.winners);
    stats.horizon_exceeded = total.exceeded;
    return stats;
}

std::uint64_t sweep_row_seed(std::uint64_t master_seed, std::size_t n_sites) {
    return derive_seed(master_seed, n_sites);
}

SweepTable scaling_sweep(std::span<const std::size_t> n_list, const SimParams& base,
                         std::uint64_t m, unsigned threads) {
    if (n_list.empty()) {
        throw std::invalid_argument("scaling_sweep: empty list of sizes");
    }
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        if (n_list[i] < 1 || (i > 0 && n_list[i] <= n_list[i - 1])) {
            throw std::invalid_argument("scaling_sweep: sizes must be positive and strictly increasing");
        }
    }
    SweepTable table;
    table.reserve(n_list.size());
    for (std::size_t n : n_list) {
        SimParams params = base;
        params.n_sites = n;
        params.master_seed = sweep_row_seed(base.master_seed, n);
        table.push_back({n, run_ensemble(params, m, init_uniform(n), threads)});
    }
    return table;
}

FitResult fit_linear(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 3) {
        throw std::invalid_argument("fit_linear: need at least 3 paired points");
    }
    const double count = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= count;
    my /= count;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) {
        throw std::invalid_argument("fit_linear: regressor has no spread");
    }
    FitResult fit;
    fit.rows_used = x.size();
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.slope * x[i] + fit.intercept);
        sse += r * r;
    }
    fit.r_squared = syy > 0.0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 0.0;
    fit.slope_stderr = std::sqrt(sse / (count - 2.0) / sxx);
    return fit;
}

FitResult fit_lnln(const SweepTable& table, std::size_t n_min) {
    if (n_min < 3) {
        throw std::invalid_argument("fit_lnln: n_min must be >= 3 so that ln ln N > 0");
    }
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& row : table) {
        if (row.n_sites >= n_min && row.stats.valid_for_fit()) {
            x.push_back(std::log(std::log(static_cast<double>(row.n_sites))));
            y.push_back(row.stats.mean_time);
        }
    }
    if (x.size() < 3) {
        throw std::invalid_argument("fit_lnln: fewer than 3 qualifying rows");
    }
    return fit_linear(x, y);
}

double pair_correlation_bound(std::size_t n_sites, double t) {
    const double nm1 = static_cast<double>(n_sites) - 1.0;
    return 4.0 / (4.0 * t + nm1 * nm1);
}

std::vector<CorrelationRow> correlation_bound_check(const SimParams& params, std::uint64_t m,
                                                    std::span<const double> t_grid,
                                                    unsigned threads) {
    params.validate();
    const std::size_t n = params.n_sites;
    if (n < 2) {
        throw std::invalid_argument("correlation_bound_check: need at least 2 sites");
    }
    if (m < 2) {
        throw std::invalid_argument("correlation_bound_check: need at least 2 realizations");
    }
    if (t_grid.empty()) {
        throw std::invalid_argument("correlation_bound_check: empty time grid");
    }
    std::vector<std::uint64_t> grid_steps(t_grid.size());
    for (std::size_t g = 0; g < t_grid.size(); ++g) {
        if (!(t_grid[g] >= 0.0) || !std::isfinite(t_grid[g])) {
            throw std::invalid_argument("correlation_bound_check: grid times must be >= 0");
        }
        grid_steps[g] = static_cast<std::uint64_t>(std::llround(t_grid[g] / params.dt));
    }
    const std::uint64_t last_step = *std::max_element(grid_steps.begin(), grid_steps.end());
    const std::size_t pairs = n * (n - 1) / 2;
    const StateVector initial = init_uniform(n);

    // Per grid point: moments of the all-pairs average, then one per pair.
    struct Tally {
        std::vector<RunningMoments> mean_pair;
        std::vector<RunningMoments> per_pair;
    };
    auto empty_tally = [&] {
        return Tally{std::vector<RunningMoments>(t_grid.size()),
                     std::vector<RunningMoments>(t_grid.size() * pairs)};
    };

    auto observe = [&](Tally& tally, std::size_t g, std::span<const double> v) {
        double sum = 0.0;
        double sum_sq = 0.0;
        for (double x : v) {
            sum += x;
            sum_sq += x * x;
        }
        tally.mean_pair[g].add((sum * sum - sum_sq) / static_cast<double>(n * (n - 1)));
        std::size_t p = g * pairs;
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = a + 1; b < n; ++b) {
                tally.per_pair[p++].add(v[a] * v[b]);
            }
        }
    };

    auto block = [&](std::uint64_t begin, std::uint64_t end) {
        Tally tally = empty_tally();
        std::vector<double> v;
        std::vector<double> noise(n);
        std::vector<double> scratch;
        for (std::uint64_t i = begin; i < end; ++i) {
            RandomStream stream = derive_stream(params.master_seed, i);
            v.assign(initial.values().begin(), initial.values().end());
            for (std::uint64_t step = 0;; ++step) {
                for (std::size_t g = 0; g < grid_steps.size(); ++g) {
                    if (grid_steps[g] == step) {
                        observe(tally, g, v);
                    }
                }
                if (step == last_step) {
                    break;
                }
                fill_noise(params.noise_kind, stream, noise);
                euler_step_inplace(v, noise, params.dt, scratch);
            }
        }
        return tally;
    };
    auto combine = [](Tally& acc, Tally&& part) {
        for (std::size_t k = 0; k < acc.mean_pair.size(); ++k) {
            acc.mean_pair[k].merge(part.mean_pair[k]);
        }
        for (std::size_t k = 0; k < acc.per_pair.size(); ++k) {
            acc.per_pair[k].merge(part.per_pair[k]);
        }
    };
    const Tally total = ordered_block_reduce(m, threads, empty_tally(), block, combine);

    std::vector<CorrelationRow> rows(t_grid.size());
    for (std::size_t g = 0; g < t_grid.size(); ++g) {
        CorrelationRow& row = rows[g];
        row.t = t_grid[g];
        row.mean_pair = total.mean_pair[g].mean;
        row.mean_pair_stderr = total.mean_pair[g].stderr_of_mean();
        std::size_t p = g * pairs;
        bool first = true;
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = a + 1; b < n; ++b, ++p) {
                if (first || total.per_pair[p].mean > row.max_pair) {
                    first = false;
                    row.max_pair = total.per_pair[p].mean;
                    row.max_pair_stderr = total.per_pair[p].stderr_of_mean();
                    row.max_pair_n = a;
                    row.max_pair_k = b;
                }
            }
        }
        row.bound = pair_correlation_bound(n, row.t);
        row.margin_in_stderr = row.mean_pair_stderr > 0.0
                                   ? (row.bound - row.mean_pair) / row.mean_pair_stderr
                                   : std::numeric_limits<double>::infinity();
        row.satisfied = row.mean_pair <= row.bound + 3.0 * row.mean_pair_stderr;
    }
    return rows;
}

std::vector<InitialStepRow> initial_step_experiment(std::span<const std::size_t> n_list,
                                                    const SimParams& params, std::uint64_t m,
                                                    double horizon, unsigned threads) {
    if (n_list.empty()) {
        throw std::invalid_argument("initial_step_experiment: empty list of sizes");
    }
    if (!(params.dt <= horizon)) {
        throw std::invalid_argument("initial_step_experiment: dt must not exceed the horizon");
    }
    if (m < 1) {
        throw std::invalid_argument("initial_step_experiment: need at least one realization");
    }
    const std::uint64_t steps = steps_for(horizon, params.dt);
    std::vector<InitialStepRow> rows;
    for (std::size_t n : n_list) {
        SimParams row_params = params;
        row_params.n_sites = n;
        row_params.validate();
        const std::uint64_t seed = sweep_row_seed(params.master_seed, n);
        const StateVector initial = init_uniform(n);

        auto block = [&](std::uint64_t begin, std::uint64_t end) {
            RunningMoments moments;
            std::vector<double> v;
            std::vector<double> noise(n);
            std::vector<double> scratch;
            for (std::uint64_t i = begin; i < end; ++i) {
                RandomStream stream = derive_stream(seed, i);
                v.assign(initial.values().begin(), initial.values().end());
                const double start = v[0];
                double running_max = start;
                for (std::uint64_t step = 0; step < steps; ++step) {
                    fill_noise(params.noise_kind, stream, noise);
                    euler_step_inplace(v, noise, params.dt, scratch);
                    running_max = std::max(running_max, v[0]);
                }
                moments.add(running_max - start);
            }
            return moments;
        };
        auto combine = [](RunningMoments& acc, RunningMoments&& part) { acc.merge(part); };
        const RunningMoments total = ordered_block_reduce(m, threads, RunningMoments{}, block, combine);
        rows.push_back({n, total.mean, total.stderr_of_mean(), m});
    }
    return rows;
}

}  // namespace collapse
