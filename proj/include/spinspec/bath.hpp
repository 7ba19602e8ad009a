// Nuclear-spin bath model: species constants, microscopic bath sampling,
// and synthesis of the parallel / perpendicular Overhauser noise spectra.
//
// S_par(omega) is a sum of coupling^2-weighted Gaussian kernels at the
// first and second Larmor harmonics of each sampled nucleus, with the
// per-nucleus precession frequency strain-broadened relative to k*omega_L.
// S_perp(omega) is a zero-centered Lorentzian that dominates below 10 MHz.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace spinspec {

struct NuclearSpecies {
    std::string name;
    double gyro_mhz_per_t = 0.0;   // gyromagnetic ratio, MHz per tesla (ordinary frequency)
    double spin = 0.0;             // spin quantum number, half-integer
    double abundance = 0.0;        // site fraction in [0, 1]; table sums to 1
    double hyperfine_scale = 0.0;  // rms coupling per nucleus, rad/us
};

// In-115 / As-75 site constants for an InAs dot; gyromagnetic ratios are
// the published NMR values.
std::vector<NuclearSpecies> default_species();

// gamma * B in MHz (ordinary frequency).  Throws on B < 0.
double larmor_frequency_mhz(const NuclearSpecies& sp, double field_b_tesla);

struct BathConfig {
    std::vector<NuclearSpecies> species = default_species();
    int n_nuclei = 40'000;
    double field_b_tesla = 2.0;
    double strain_width = 0.11;          // relative sigma of the precession frequency
    std::vector<double> harmonic_weights = {0.22, 0.78};  // k = 1, 2 (normalized internally)
    double perp_amplitude = 0.9;         // S_perp(0), rad/us
    double perp_cutoff = 18.85;          // Lorentzian cutoff, rad/us (~3 MHz)
    std::uint64_t seed = 20220901;
};

void validate(const BathConfig& config);

// Per-nucleus microscopic realization.  frequency is n_nuclei x n_harmonics
// row-major; harmonic k of nucleus i sits at frequency[i * n_harmonics + k].
struct BathSample {
    int n_nuclei = 0;
    int n_harmonics = 0;
    std::vector<int> species_index;
    std::vector<double> coupling;          // A_i >= 0, rad/us
    std::vector<double> frequency;         // rad/us
    std::vector<double> harmonic_weights;  // normalized to sum 1
};

// Deterministic in (config, seed).  Couplings follow a center-heavy
// Gaussian envelope, rescaled per species so that
// sum_i A_i^2 = n_s * hyperfine_scale_s^2.
BathSample sample_bath(const BathConfig& config);

enum class SpectrumComponent { Parallel, Perpendicular, Total };

struct NoiseSpectrum {
    std::vector<double> grid;    // strictly increasing, rad/us
    std::vector<double> values;  // S(omega) >= 0, rad/us
    SpectrumComponent component = SpectrumComponent::Total;
};

std::vector<double> make_uniform_grid(double omega_max, int n_points);

// kernel_width <= 0 selects the default of twice the grid spacing.
// Throws if sampled frequencies fall outside the grid, reporting the
// clipped power fraction.
NoiseSpectrum synthesize_parallel_spectrum(const BathSample& bath,
                                           const std::vector<double>& grid,
                                           double kernel_width = 0.0);

NoiseSpectrum synthesize_perpendicular_spectrum(const BathConfig& config,
                                                const std::vector<double>& grid);

NoiseSpectrum compose_total(const NoiseSpectrum& parallel,
                            const NoiseSpectrum& perpendicular);

// Trapezoidal integral of S over its grid.
double integrated_power(const NoiseSpectrum& spectrum);

// Linear interpolation; zero outside the grid.
double interpolate(const NoiseSpectrum& spectrum, double omega);

double total_hyperfine_variance(const BathConfig& config);

}  // namespace spinspec
