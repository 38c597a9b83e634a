#include "collapse/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace collapse {

std::string_view to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::Normal:
            return "normal";
        case NoiseKind::Bernoulli:
            return "bernoulli";
        case NoiseKind::Uniform:
            return "uniform";
    }
    return "unknown";
}

NoiseKind parse_noise_kind(std::string_view name) {
    if (name == "normal") {
        return NoiseKind::Normal;
    }
    if (name == "bernoulli") {
        return NoiseKind::Bernoulli;
    }
    if (name == "uniform") {
        return NoiseKind::Uniform;
    }
    throw std::invalid_argument("unknown noise kind '" + std::string(name) +
                                "' (expected normal, bernoulli or uniform)");
}

double default_horizon(std::size_t n_sites) {
    double n = static_cast<double>(std::max<std::size_t>(n_sites, 3));
    return 100.0 * std::max(1.0, std::log(std::log(n)));
}

double SimParams::horizon() const {
    return t_max.value_or(default_horizon(n_sites));
}

void SimParams::validate() const {
    if (n_sites < 1) {
        throw std::invalid_argument("n_sites must be >= 1");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw std::invalid_argument("dt must be a positive finite number");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("delta must lie in (0, 1)");
    }
    if (!(horizon() >= dt) || !std::isfinite(horizon())) {
        throw std::invalid_argument("t_max must be finite and >= dt");
    }
    if (path_stride < 1) {
        throw std::invalid_argument("path_stride must be >= 1");
    }
}

StateVector::StateVector(std::vector<double> v) : v_(std::move(v)) {
    if (v_.empty()) {
        throw std::invalid_argument("StateVector needs at least one site");
    }
    for (double x : v_) {
        if (!(x >= 0.0 && x <= kSimplexTotal)) {
            throw std::invalid_argument("StateVector component outside [0, 2]");
        }
    }
    if (std::abs(sum() - kSimplexTotal) > kSumTolerance) {
        throw std::invalid_argument("StateVector components must sum to 2");
    }
}

double StateVector::sum() const {
    return std::accumulate(v_.begin(), v_.end(), 0.0);
}

std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
    return mix64(mix64(master_seed) ^ mix64(index + 0x9E3779B97F4A7C15ULL));
}

RandomStream derive_stream(std::uint64_t master_seed, std::uint64_t index) {
    return RandomStream(derive_seed(master_seed, index));
}

double sample_noise(NoiseKind kind, RandomStream& rng) {
    static const double kSqrt3 = std::sqrt(3.0);
    switch (kind) {
        case NoiseKind::Normal:
            return rng.normal();
        case NoiseKind::Bernoulli:
            return (rng.bits() >> 63) ? 1.0 : -1.0;
        case NoiseKind::Uniform:
            return kSqrt3 * (2.0 * rng.uniform01() - 1.0);
    }
    return 0.0;
}

void fill_noise(NoiseKind kind, RandomStream& rng, std::span<double> out) {
    for (double& x : out) {
        x = sample_noise(kind, rng);
    }
}

StateVector init_uniform(std::size_t n_sites) {
    if (n_sites == 0) {
        throw std::invalid_argument("init_uniform: n_sites must be >= 1");
    }
    return StateVector(std::vector<double>(n_sites, kSimplexTotal / static_cast<double>(n_sites)));
}

StateVector init_weighted(std::span<const double> weights) {
    if (weights.empty()) {
        throw std::invalid_argument("init_weighted: empty weight vector");
    }
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw std::invalid_argument("init_weighted: weights must be finite and nonnegative");
        }
        total += w;
    }
    if (!(total > 0.0)) {
        throw std::invalid_argument("init_weighted: weights must not all be zero");
    }
    std::vector<double> v(weights.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = kSimplexTotal * weights[i] / total;
    }
    // Absorb the last ulp of rounding into the largest entry.
    auto largest = std::max_element(v.begin(), v.end());
    double rest = std::accumulate(v.begin(), v.end(), 0.0) - *largest;
    *largest = std::clamp(kSimplexTotal - rest, 0.0, kSimplexTotal);
    return StateVector(std::move(v));
}

bool repair_simplex(std::span<double> v) {
    bool clamped = false;
    for (double& x : v) {
        if (x < 0.0) {
            x = 0.0;
            clamped = true;
        } else if (x > kSimplexTotal) {
            x = kSimplexTotal;
            clamped = true;
        }
    }
    if (clamped) {
        renormalize_simplex(v);
    }
    return clamped;
}

void renormalize_simplex(std::span<double> v) {
    double pinned = 0.0;
    double free = 0.0;
    for (double x : v) {
        if (x <= 0.0 || x >= kSimplexTotal) {
            pinned += x;
        } else {
            free += x;
        }
    }
    double target = kSimplexTotal - pinned;
    if (free > 0.0 && target > 0.0) {
        double scale = target / free;
        for (double& x : v) {
            if (x > 0.0 && x < kSimplexTotal) {
                x = std::min(x * scale, kSimplexTotal);
            }
        }
        return;
    }
    if (target <= 0.0) {
        for (double& x : v) {
            if (x > 0.0 && x < kSimplexTotal) {
                x = 0.0;
            }
        }
    }
    double total = std::accumulate(v.begin(), v.end(), 0.0);
    if (total == kSimplexTotal) {
        return;
    }
    if (total > 0.0) {
        for (double& x : v) {
            x *= kSimplexTotal / total;
        }
    } else {
        std::fill(v.begin(), v.end(), kSimplexTotal / static_cast<double>(v.size()));
    }
}

}  // namespace collapse
