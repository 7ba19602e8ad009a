// Reconstruction of S(omega) from families of CPMG coherence curves.
//
// The primary path is the descending-frequency recursion over the comb
// approximation chi(T) ~= T sum_k w_k S(k pi / tau): each target frequency
// omega_i = n_i pi / T_i is solved after every frequency above it, with the
// harmonic terms k >= 3 interpolated from the already-solved values and
// S assumed zero above omega_cutoff.  A non-negative least-squares solve
// over the exact filter matrix provides the independent cross-check.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "spinspec/forward.hpp"

namespace spinspec {

enum class DecompositionMethod { Recursive, Lsq };

struct DecompositionResult {
    std::vector<double> grid;     // rad/us, increasing
    std::vector<double> s_hat;    // clipped at 0
    std::vector<double> sigma_s;  // propagated from sigma_C
    std::vector<double> s_raw;    // pre-clip values, diagnostics
    std::vector<char> valid;      // 0 where harmonic coverage was missing
    DecompositionMethod method = DecompositionMethod::Recursive;
    std::vector<std::string> inputs;
};

struct RecursiveOptions {
    int k_max = 11;                    // odd; highest comb harmonic subtracted
    double omega_cutoff = 753.98;      // 2*pi*120 rad/us
    double c_floor = 0.02;             // discard samples with C/envelope below this
    double t1_us = 1.0;                // envelope divided out before -ln
};

DecompositionResult decompose_recursive(const std::vector<CoherenceCurve>& curves,
                                        const RecursiveOptions& opts);

struct LsqOptions {
    std::vector<double> bin_edges;  // m+1 increasing edges spanning the band
    double lambda = 1e-3;           // second-difference smoothing weight
    double c_floor = 0.02;
    double t1_us = 1.0;
    int max_iterations = 400;
};

DecompositionResult decompose_lsq(const std::vector<CoherenceCurve>& curves,
                                  const LsqOptions& opts);

struct GaussianFit {
    double center_mhz = 0.0;
    double amplitude = 0.0;  // rad/us
    double width_mhz = 0.0;  // Gaussian sigma
    double baseline = 0.0;   // rad/us
    std::array<std::array<double, 4>, 4> covariance{};  // (center, amplitude, width, baseline)
    double residual_norm = 0.0;
};

// Weighted least squares of baseline + amplitude*exp(-(f-center)^2/(2 width^2))
// with 5 deterministic starts from the data quantiles.
GaussianFit fit_gaussian(const DecompositionResult& result);

struct StretchedExpFit {
    double amplitude = 0.0;   // a
    double t2_star_us = 0.0;  // T2*
    double exponent = 0.0;    // p
    std::array<std::array<double, 3>, 3> covariance{};  // (a, T2*, p)
    double residual_norm = 0.0;
};

// a * exp(-(T/T2*)^p), deterministic initialization (a from the first
// sample, T2* from the 1/e crossing, p = 2).
StretchedExpFit fit_stretched_exp(const CoherenceCurve& curve);

}  // namespace spinspec
