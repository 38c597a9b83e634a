#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "collapse/core.hpp"

namespace collapse {

using Amplitudes = std::vector<std::complex<double>>;

/// Time-integrated, rescaled readouts R_n = (1/tau_m) int_0^t r_n dt'.
/// Under QND sigma_z monitoring these are a sufficient statistic for the
/// conditional state.
struct ReadoutRecord {
    std::vector<double> r;
    double t = 0.0;
    double tau_m = 1.0;

    void validate() const;
};

/// Real nonnegative amplitudes sqrt(p_n) for a probability vector p.
Amplitudes amplitudes_from_probabilities(std::span<const double> probabilities);

/// |alpha_n|^2 for each component.
std::vector<double> probabilities(const Amplitudes& alpha);

/// Draws the excited site n with probability |alpha_n|^2.
std::size_t sample_excited_site(const Amplitudes& alpha0, RandomStream& stream);

/// Readouts given that site `excited` of `n_sites` holds the excitation:
/// R_excited ~ N(+t/tau_m, t/tau_m), every other R_j ~ N(-t/tau_m, t/tau_m).
ReadoutRecord sample_readouts_for_site(std::size_t excited, std::size_t n_sites, double t,
                                       double tau_m, RandomStream& stream);

/// Samples a readout record from the exact mixture: site n is excited with
/// probability |alpha_n(0)|^2, then R_n ~ N(+t/tau_m, t/tau_m) and
/// R_j ~ N(-t/tau_m, t/tau_m) for j != n, independently.
/// Rejects amplitudes whose squared norm differs from 1 by more than 1e-9.
ReadoutRecord sample_readouts(const Amplitudes& alpha0, double t, double tau_m,
                              RandomStream& stream);

/// Conditional state alpha_n(t) proportional to alpha_n(0) exp(R_n), normalized.
/// Exponentials are shifted by the largest R over sites with nonzero
/// amplitude, so |R| up to ~1e4 stays finite.
Amplitudes conditional_state(const Amplitudes& alpha0, const ReadoutRecord& record);

/// Collapse test in ratio form:
///   |alpha~_n|^2 / sum_{j != n} |alpha~_j|^2 >= (1 - delta/2) / (delta/2),
/// equivalently 2|alpha_n(t)|^2 - 1 >= 1 - delta. `weights` are the initial
/// populations |alpha_n(0)|^2; an empty span means the uniform start.
bool collapse_criterion(const ReadoutRecord& record, std::size_t n, double delta,
                        std::span<const double> weights = {});

struct BornFrequencies {
    std::vector<double> frequencies;
    std::vector<std::uint64_t> counts;
    /// Runs whose largest |alpha_n(t)|^2 was shared by several sites.
    std::uint64_t unresolved = 0;
    std::uint64_t realizations = 0;
};

/// Samples `m` records, conditions on each and assigns the run to the site
/// with the largest posterior weight. Stream i is derive_stream(seed, i), so
/// the result does not depend on `threads`.
BornFrequencies born_frequencies(const Amplitudes& alpha0, double t, double tau_m,
                                 std::uint64_t m, std::uint64_t seed, unsigned threads = 1);

}  // namespace collapse
