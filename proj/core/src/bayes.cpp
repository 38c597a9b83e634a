#include "collapse/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "collapse/parallel.hpp"

namespace collapse {

namespace {

constexpr double kNormTolerance = 1e-9;

void check_normalized(const Amplitudes& alpha) {
    if (alpha.empty()) {
        throw std::invalid_argument("amplitude vector is empty");
    }
    double norm = 0.0;
    for (const auto& a : alpha) {
        norm += std::norm(a);
    }
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > kNormTolerance) {
        throw std::invalid_argument("amplitudes must satisfy sum |alpha_n|^2 = 1");
    }
}

/// log(sum_i w_i exp(x_i)) over entries with w_i > 0; -inf if there are none.
double log_weighted_sum_exp(std::span<const double> log_terms, std::span<const double> weights,
                            std::size_t skip) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < log_terms.size(); ++i) {
        if (i != skip && weights[i] > 0.0) {
            top = std::max(top, log_terms[i]);
        }
    }
    if (top == -std::numeric_limits<double>::infinity()) {
        return top;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < log_terms.size(); ++i) {
        if (i != skip && weights[i] > 0.0) {
            acc += weights[i] * std::exp(log_terms[i] - top);
        }
    }
    return top + std::log(acc);
}

}  // namespace

void ReadoutRecord::validate() const {
    if (r.empty()) {
        throw std::invalid_argument("ReadoutRecord: empty readout vector");
    }
    for (double x : r) {
        if (!std::isfinite(x)) {
            throw std::invalid_argument("ReadoutRecord: readouts must be finite");
        }
    }
    if (!(t >= 0.0) || !std::isfinite(t)) {
        throw std::invalid_argument("ReadoutRecord: t must be finite and >= 0");
    }
    if (!(tau_m > 0.0)) {
        throw std::invalid_argument("ReadoutRecord: tau_m must be positive");
    }
}

Amplitudes amplitudes_from_probabilities(std::span<const double> probabilities) {
    Amplitudes out;
    out.reserve(probabilities.size());
    for (double p : probabilities) {
        if (!(p >= 0.0)) {
            throw std::invalid_argument("probabilities must be nonnegative");
        }
        out.emplace_back(std::sqrt(p), 0.0);
    }
    return out;
}

std::vector<double> probabilities(const Amplitudes& alpha) {
    std::vector<double> p(alpha.size());
    std::transform(alpha.begin(), alpha.end(), p.begin(),
                   [](const std::complex<double>& a) { return std::norm(a); });
    return p;
}

std::size_t sample_excited_site(const Amplitudes& alpha0, RandomStream& stream) {
    const double u = stream.uniform01();
    double cumulative = 0.0;
    std::size_t last_nonzero = 0;
    for (std::size_t n = 0; n < alpha0.size(); ++n) {
        const double p = std::norm(alpha0[n]);
        if (p > 0.0) {
            last_nonzero = n;
        }
        cumulative += p;
        if (u < cumulative) {
            return n;
        }
    }
    // u landed in the rounding gap above the cumulative sum.
    return last_nonzero;
}

ReadoutRecord sample_readouts_for_site(std::size_t excited, std::size_t n_sites, double t,
                                       double tau_m, RandomStream& stream) {
    if (!(t >= 0.0) || !(tau_m > 0.0)) {
        throw std::invalid_argument("sample_readouts: need t >= 0 and tau_m > 0");
    }
    if (excited >= n_sites) {
        throw std::invalid_argument("sample_readouts: excited site out of range");
    }
    ReadoutRecord record;
    record.t = t;
    record.tau_m = tau_m;
    record.r.resize(n_sites);
    const double drift = t / tau_m;
    const double sd = std::sqrt(drift);
    for (std::size_t j = 0; j < n_sites; ++j) {
        const double mean = j == excited ? drift : -drift;
        record.r[j] = mean + sd * stream.normal();
    }
    return record;
}

ReadoutRecord sample_readouts(const Amplitudes& alpha0, double t, double tau_m,
                              RandomStream& stream) {
    check_normalized(alpha0);
    const std::size_t excited = sample_excited_site(alpha0, stream);
    return sample_readouts_for_site(excited, alpha0.size(), t, tau_m, stream);
}

Amplitudes conditional_state(const Amplitudes& alpha0, const ReadoutRecord& record) {
    check_normalized(alpha0);
    record.validate();
    if (record.r.size() != alpha0.size()) {
        throw std::invalid_argument("conditional_state: record and amplitudes differ in size");
    }
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < alpha0.size(); ++n) {
        if (std::norm(alpha0[n]) > 0.0) {
            top = std::max(top, record.r[n]);
        }
    }
    Amplitudes out(alpha0.size());
    double norm = 0.0;
    for (std::size_t n = 0; n < alpha0.size(); ++n) {
        out[n] = std::norm(alpha0[n]) > 0.0 ? alpha0[n] * std::exp(record.r[n] - top) : 0.0;
        norm += std::norm(out[n]);
    }
    if (!(norm > 0.0)) {
        throw std::invalid_argument("conditional_state: degenerate posterior");
    }
    const double inv = 1.0 / std::sqrt(norm);
    for (auto& a : out) {
        a *= inv;
    }
    return out;
}

bool collapse_criterion(const ReadoutRecord& record, std::size_t n, double delta,
                        std::span<const double> weights) {
    record.validate();
    if (!(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("collapse_criterion: delta must lie in (0, 1)");
    }
    const std::size_t size = record.r.size();
    if (n >= size) {
        throw std::invalid_argument("collapse_criterion: site index out of range");
    }
    std::vector<double> w(weights.begin(), weights.end());
    if (w.empty()) {
        w.assign(size, 1.0);
    } else if (w.size() != size) {
        throw std::invalid_argument("collapse_criterion: weights and record differ in size");
    }
    if (!(w[n] > 0.0)) {
        return false;
    }
    std::vector<double> twice_r(size);
    for (std::size_t k = 0; k < size; ++k) {
        twice_r[k] = 2.0 * record.r[k];
    }
    // log |alpha~_n|^2 - log sum_{j != n} |alpha~_j|^2 >= log((1 - delta/2) / (delta/2))
    const double rest = log_weighted_sum_exp(twice_r, w, n);
    const double lhs = std::log(w[n]) + twice_r[n] - rest;
    const double threshold = std::log((1.0 - delta / 2.0) / (delta / 2.0));
    return lhs >= threshold;
}

BornFrequencies born_frequencies(const Amplitudes& alpha0, double t, double tau_m,
                                 std::uint64_t m, std::uint64_t seed, unsigned threads) {
    check_normalized(alpha0);
    if (m < 1) {
        throw std::invalid_argument("born_frequencies: need at least one realization");
    }
    const std::size_t size = alpha0.size();
    struct Tally {
        std::vector<std::uint64_t> counts;
        std::uint64_t unresolved = 0;
    };

    auto block = [&](std::uint64_t begin, std::uint64_t end) {
        Tally tally{std::vector<std::uint64_t>(size, 0), 0};
        for (std::uint64_t i = begin; i < end; ++i) {
            RandomStream stream = derive_stream(seed, i);
            const ReadoutRecord record = sample_readouts(alpha0, t, tau_m, stream);
            const std::vector<double> p = probabilities(conditional_state(alpha0, record));
            const auto best = std::max_element(p.begin(), p.end());
            if (std::count(p.begin(), p.end(), *best) > 1) {
                ++tally.unresolved;
            } else {
                ++tally.counts[static_cast<std::size_t>(best - p.begin())];
            }
        }
        return tally;
    };
    auto combine = [](Tally& acc, Tally&& part) {
        for (std::size_t k = 0; k < acc.counts.size(); ++k) {
            acc.counts[k] += part.counts[k];
        }
        acc.unresolved += part.unresolved;
    };
    Tally total = ordered_block_reduce(m, threads, Tally{std::vector<std::uint64_t>(size, 0), 0},
                                       block, combine);

    BornFrequencies out;
    out.counts = std::move(total.counts);
    out.unresolved = total.unresolved;
    out.realizations = m;
    out.frequencies.resize(size);
    for (std::size_t k = 0; k < size; ++k) {
        out.frequencies[k] = static_cast<double>(out.counts[k]) / static_cast<double>(m);
    }
    return out;
}

}  // namespace collapse
