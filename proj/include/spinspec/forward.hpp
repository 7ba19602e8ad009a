// Forward map from a noise spectrum to coherence functions C(T), computed
// two independent ways:
//   - spectral quadrature of chi(T) = (1/pi) int S(w) F(wT) / w^2 dw with
//     C = exp(-chi) (Gaussian noise), plus T1 and quasistatic envelopes;
//   - Monte-Carlo accumulation of the stochastic phase over explicit noise
//     realizations, which serves as the oracle for the quadrature path.

#pragma once

#include <cstdint>
#include <vector>

#include "spinspec/bath.hpp"
#include "spinspec/sequence.hpp"

namespace spinspec {

struct EnvelopeParams {
    double t1_us = 1.0;              // longitudinal relaxation
    double quasistatic_sigma = 0.0;  // residual Overhauser broadening, rad/us;
                                     // dephases Ramsey only (echoes cancel it)
};

enum class Provenance { Quadrature, MonteCarlo, External };

struct CoherenceSample {
    double time_us = 0.0;
    double coherence = 0.0;
    double sigma = 0.0;
};

struct CoherenceCurve {
    SequenceKind kind = SequenceKind::Cpmg;
    int n_pi = 1;
    double field_b_tesla = 0.0;
    Provenance provenance = Provenance::Quadrature;
    std::uint64_t seed = 0;
    std::vector<CoherenceSample> samples;  // strictly increasing T
};

struct ChiResult {
    double chi = 0.0;
    // fraction of chi supplied by the flat-tail extension beyond the grid;
    // band_clipped is set when it exceeds 0.1%.
    double tail_fraction = 0.0;
    bool band_clipped = false;
};

// Quadrature resolves the filter oscillation period 2 pi / T inside every
// grid cell.  Beyond the grid the spectrum is continued flat at its last
// value and integrated through the exact identity
// (1/pi) int_0^inf F/w^2 dw = T/2.
ChiResult chi_integral(const NoiseSpectrum& spectrum, const PulseSequence& seq,
                       double rel_tol = 1e-6);

CoherenceCurve coherence_curve(const NoiseSpectrum& spectrum, SequenceKind kind,
                               int n_pi, const std::vector<double>& t_grid,
                               const EnvelopeParams& env, double field_b_tesla = 0.0);

struct McOptions {
    int n_realizations = 20'000;
    std::uint64_t seed = 1;
    int n_threads = 0;        // 0 = hardware concurrency
    double mode_spacing = 0;  // 0 = min(2pi/(10 T_max), half min grid spacing)
};

// b(t) = sum_m sqrt(2 S(w_m) dw / pi) cos(w_m t + phi_m), phi uniform;
// phase = int s(t) b(t) dt by exact per-segment integration; C = <cos phi>.
// Envelopes are NOT applied; this is the bare dephasing factor.
CoherenceCurve mc_coherence(const NoiseSpectrum& spectrum, SequenceKind kind,
                            int n_pi, const std::vector<double>& t_grid,
                            const McOptions& opts);

}  // namespace spinspec
