#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace collapse {

/// Total occupation of the single-excitation simplex: sum of V_n = 2.
inline constexpr double kSimplexTotal = 2.0;

enum class NoiseKind { Normal, Bernoulli, Uniform };

std::string_view to_string(NoiseKind kind);

/// Parses "normal", "bernoulli" or "uniform" (case-sensitive).
/// Throws std::invalid_argument on anything else.
NoiseKind parse_noise_kind(std::string_view name);

/// Parameters shared by every trajectory of a run.
///
/// `t_max` is optional; when unset the horizon defaults to
/// 100 * max(1, ln ln max(N, 3)), see `default_horizon`.
struct SimParams {
    std::size_t n_sites = 2;
    double dt = 1.0 / 25.0;
    double delta = 1e-2;
    std::optional<double> t_max;
    NoiseKind noise_kind = NoiseKind::Normal;
    std::uint64_t master_seed = 0;
    bool record_path = false;
    std::size_t path_stride = 1;

    double horizon() const;
    /// Throws std::invalid_argument if any invariant is broken.
    void validate() const;
};

double default_horizon(std::size_t n_sites);

/// Coordinates V_n = U_{3,n} + 1 = 2|alpha_n|^2 of one excitation spread
/// over N sites. Always satisfies sum V_n = 2 and 0 <= V_n <= 2.
class StateVector {
  public:
    static constexpr double kSumTolerance = 1e-9;

    /// Validates and takes ownership. Throws std::invalid_argument.
    explicit StateVector(std::vector<double> v);

    std::size_t size() const { return v_.size(); }
    double operator[](std::size_t i) const { return v_[i]; }
    std::span<const double> values() const { return v_; }
    double sum() const;

    /// U_{3,n} = V_n - 1.
    double u3(std::size_t i) const { return v_[i] - 1.0; }
    /// |alpha_n|^2 = V_n / 2.
    double probability(std::size_t i) const { return v_[i] / 2.0; }

    bool operator==(const StateVector&) const = default;

  private:
    std::vector<double> v_;
};

/// One i.i.d. zero-mean unit-variance draw per site for a single step.
using NoiseVector = std::vector<double>;

struct PathSample {
    double t = 0.0;
    std::vector<double> v;
};

struct TrajectoryResult {
    std::optional<double> collapse_time;
    std::optional<std::size_t> winner;
    std::uint64_t steps_taken = 0;
    std::vector<PathSample> path;

    bool collapsed() const { return winner.has_value(); }
};

/// Per-trajectory random stream. Owns its engine and the Gaussian sampler
/// state, so it must never be shared between trajectories.
class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double uniform01() { return uniform_(engine_); }
    std::uint64_t bits() { return engine_(); }

  private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// SplitMix64 finalizer (Stafford variant 13). Bijective on 64 bits.
std::uint64_t mix64(std::uint64_t x);

/// Seed for trajectory `index` under `master_seed`:
///   mix64(mix64(master_seed) ^ mix64(index + 0x9E3779B97F4A7C15)).
/// The mapping depends only on (master_seed, index), never on how work is
/// split across threads.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index);

RandomStream derive_stream(std::uint64_t master_seed, std::uint64_t index);

/// One draw with zero mean and unit variance:
/// Normal -> N(0,1), Bernoulli -> {-1,+1} w.p. 1/2, Uniform -> U[-sqrt3, sqrt3].
double sample_noise(NoiseKind kind, RandomStream& rng);

void fill_noise(NoiseKind kind, RandomStream& rng, std::span<double> out);

StateVector init_uniform(std::size_t n_sites);

/// V_n = 2 w_n / sum(w). Rejects negative entries and an all-zero vector.
StateVector init_weighted(std::span<const double> weights);

/// Clamps every coordinate into [0, 2]. If anything moved, restores the
/// total to 2 via `renormalize_simplex`. Returns whether a clamp happened.
bool repair_simplex(std::span<double> v);

/// Restores sum v = 2 by scaling the entries strictly inside (0, 2); entries
/// pinned at 0 or 2 are held fixed. Falls back to scaling everything when the
/// free entries cannot absorb the remainder.
void renormalize_simplex(std::span<double> v);

}  // namespace collapse
