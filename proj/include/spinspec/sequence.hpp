// Pulse-sequence timelines and their filter functions.
//
// A sequence is pi/2 -- (pi)*n -- pi/2 with total free-evolution time T.
// Its switching function s(t) is +1 before the first pi pulse and flips
// sign at every pi time.  The filter function is
//
//     F(omega) = (omega^2 / 2) * | integral_0^T s(t) e^{i omega t} dt |^2
//
// fixed so that the attenuation exponent is
//
//     chi(T) = (1/pi) * integral_0^inf S(omega) F(omega) / omega^2 domega.

#pragma once

#include <complex>
#include <optional>
#include <vector>

namespace spinspec {

enum class SequenceKind { Ramsey, Cpmg };

struct PulseSequence {
    SequenceKind kind = SequenceKind::Ramsey;
    int n_pi = 0;                 // number of pi pulses (0 for Ramsey)
    double total_time = 0.0;      // T, us
    std::vector<double> pi_times; // strictly increasing, all in (0, T)
};

// CPMG spacing: t_j = T (2j - 1) / (2n), j = 1..n.
PulseSequence build_sequence(SequenceKind kind, int n_pi, double total_time);

// s(t) for t in [0, T]; throws outside the window.
int switching_value(const PulseSequence& seq, double t);

// y(omega) = integral_0^T s(t) e^{i omega t} dt, evaluated segment by
// segment; finite and cancellation-free for every omega >= 0.
std::complex<double> switching_transform(const PulseSequence& seq, double omega);

// F(omega) = omega^2 |y|^2 / 2
double filter_value(const PulseSequence& seq, double omega);

// F(omega)/omega^2 = |y|^2 / 2; this is the quantity the chi quadrature
// integrates and it stays finite at omega = 0.
double filter_over_omega_sq(const PulseSequence& seq, double omega);

// Closed forms in z = omega*T:
//   Ramsey:  2 sin^2(z/2)
//   CPMG-n:  8 sin^4(z/4n) / cos^2(z/2n) * [sin^2(z/2) n even, cos^2(z/2) n odd]
// Returns nullopt at the removable 0/0 points (cos(z/2n) ~ 0), where the
// caller should fall back to the segment sum.
std::optional<double> filter_closed_form(int n_pi, double z);

// (1/pi) * integral_{lo}^{hi} F(omega)/omega^2 domega by oscillation-aware
// composite quadrature.  The full-band value (lo=0, hi=inf) equals T/2 for
// any balanced switching function; tail_to_infinity supplies the remainder
// beyond `hi` through that identity.
double filter_band_integral(const PulseSequence& seq, double omega_lo,
                            double omega_hi, double rel_tol = 1e-9);

struct Harmonic {
    double omega;   // k pi / tau, rad/us
    double weight;  // 4 / (pi^2 k^2)
};

// Delta-comb approximation of a CPMG filter with pulse spacing tau:
// chi(T) ~= T * sum_k weight_k * S(omega_k) over odd k <= k_max.
// The weights sum to 1/2 as k_max -> inf, reproducing chi = S0 T / 2 for
// white noise.
std::vector<Harmonic> harmonic_weights(int n_pi, double tau, int k_max);

}  // namespace spinspec
