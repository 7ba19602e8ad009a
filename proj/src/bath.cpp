#include "spinspec/bath.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "spinspec/rng.hpp"
#include "spinspec/units.hpp"

namespace spinspec {

std::vector<NuclearSpecies> default_species() {
    // Published NMR gyromagnetic ratios (gamma/2pi, MHz/T).  Site fractions
    // are the InAs sublattice occupations.  The hyperfine scales set the
    // per-species share of the Overhauser variance; indium dominates.
    return {
        {"In-115", 9.3856, 4.5, 0.5, 1.03},
        {"As-75", 7.3150, 1.5, 0.5, 0.515},
    };
}

double larmor_frequency_mhz(const NuclearSpecies& sp, double field_b_tesla) {
    if (field_b_tesla < 0.0)
        throw ConfigError("larmor_frequency: negative field rejected");
    return sp.gyro_mhz_per_t * field_b_tesla;
}

void validate(const BathConfig& config) {
    if (config.species.empty()) throw ConfigError("bath: species table empty");
    double abundance_sum = 0.0;
    for (const auto& sp : config.species) {
        if (!(sp.gyro_mhz_per_t > 0.0))
            throw ConfigError("bath: gyro ratio must be > 0 (" + sp.name + ")");
        const double twice = 2.0 * sp.spin;
        const int twice_int = static_cast<int>(std::round(twice));
        if (std::abs(twice - twice_int) > 1e-12 || twice_int < 1 || twice_int > 9 ||
            twice_int % 2 == 0)
            throw ConfigError("bath: spin quantum must be a half-integer in {1/2..9/2} (" +
                              sp.name + ")");
        if (sp.abundance < 0.0 || sp.abundance > 1.0)
            throw ConfigError("bath: abundance outside [0,1] (" + sp.name + ")");
        if (sp.hyperfine_scale < 0.0)
            throw ConfigError("bath: hyperfine scale must be >= 0 (" + sp.name + ")");
        abundance_sum += sp.abundance;
    }
    if (std::abs(abundance_sum - 1.0) > 1e-9)
        throw ConfigError("bath: species abundances must sum to 1");
    if (config.n_nuclei < 1) throw ConfigError("bath: n_nuclei must be >= 1");
    if (config.field_b_tesla < 0.0) throw ConfigError("bath: field must be >= 0");
    if (config.strain_width < 0.0) throw ConfigError("bath: strain_width must be >= 0");
    if (!(config.perp_cutoff > 0.0)) throw ConfigError("bath: perp_cutoff must be > 0");
    if (config.perp_amplitude < 0.0)
        throw ConfigError("bath: perp_amplitude must be >= 0");
    if (config.harmonic_weights.empty())
        throw ConfigError("bath: harmonic_weights empty");
    double weight_sum = 0.0;
    for (double w : config.harmonic_weights) {
        if (w < 0.0) throw ConfigError("bath: harmonic weights must be >= 0");
        weight_sum += w;
    }
    if (!(weight_sum > 0.0)) throw ConfigError("bath: harmonic weights all zero");
}

double total_hyperfine_variance(const BathConfig& config) {
    double v = 0.0;
    for (const auto& sp : config.species)
        v += config.n_nuclei * sp.abundance * sp.hyperfine_scale * sp.hyperfine_scale;
    return v;
}

BathSample sample_bath(const BathConfig& config) {
    validate(config);
    const int n = config.n_nuclei;
    const int nh = static_cast<int>(config.harmonic_weights.size());

    BathSample bath;
    bath.n_nuclei = n;
    bath.n_harmonics = nh;
    bath.species_index.resize(n);
    bath.coupling.resize(n);
    bath.frequency.resize(static_cast<std::size_t>(n) * nh);

    const double weight_sum = std::accumulate(config.harmonic_weights.begin(),
                                              config.harmonic_weights.end(), 0.0);
    bath.harmonic_weights.resize(nh);
    for (int k = 0; k < nh; ++k)
        bath.harmonic_weights[k] = config.harmonic_weights[k] / weight_sum;

    auto engine = make_engine(config.seed, 0);
    std::vector<double> abundances;
    for (const auto& sp : config.species) abundances.push_back(sp.abundance);
    std::discrete_distribution<int> pick_species(abundances.begin(), abundances.end());
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> strain(0.0, 1.0);

    // Center-heavy envelope: |psi|^2 ~ exp(-r^2) over a uniform position
    // draw; only the per-species normalization below is observable.
    std::vector<double> raw(n);
    for (int i = 0; i < n; ++i) {
        bath.species_index[i] = pick_species(engine);
        const double r = 2.5 * uniform(engine);
        raw[i] = std::exp(-0.5 * r * r);
        const double omega_l =
            mhz_to_rad_per_us(larmor_frequency_mhz(config.species[bath.species_index[i]],
                                                   config.field_b_tesla));
        for (int k = 0; k < nh; ++k) {
            const double f =
                (k + 1.0) * omega_l * (1.0 + config.strain_width * strain(engine));
            bath.frequency[static_cast<std::size_t>(i) * nh + k] = std::max(f, 0.0);
        }
    }

    // Normalize per species: sum_i A_i^2 = n_s * hyperfine_scale_s^2.
    const int n_species = static_cast<int>(config.species.size());
    std::vector<double> raw_sq_sum(n_species, 0.0);
    std::vector<long> counts(n_species, 0);
    for (int i = 0; i < n; ++i) {
        raw_sq_sum[bath.species_index[i]] += raw[i] * raw[i];
        ++counts[bath.species_index[i]];
    }
    std::vector<double> scale(n_species, 0.0);
    for (int s = 0; s < n_species; ++s) {
        if (counts[s] == 0) continue;
        const double target =
            counts[s] * config.species[s].hyperfine_scale * config.species[s].hyperfine_scale;
        scale[s] = std::sqrt(target / raw_sq_sum[s]);
    }
    for (int i = 0; i < n; ++i) bath.coupling[i] = raw[i] * scale[bath.species_index[i]];

    return bath;
}

std::vector<double> make_uniform_grid(double omega_max, int n_points) {
    if (!(omega_max > 0.0) || n_points < 2)
        throw ConfigError("make_uniform_grid: need omega_max > 0 and n_points >= 2");
    std::vector<double> grid(n_points);
    for (int i = 0; i < n_points; ++i)
        grid[i] = omega_max * static_cast<double>(i) / (n_points - 1);
    return grid;
}

namespace {

void check_grid(const std::vector<double>& grid) {
    if (grid.size() < 2) throw ConfigError("spectrum grid needs >= 2 points");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw ConfigError("spectrum grid must be strictly increasing");
}

}  // namespace

NoiseSpectrum synthesize_parallel_spectrum(const BathSample& bath,
                                           const std::vector<double>& grid,
                                           double kernel_width) {
    check_grid(grid);
    const double spacing = grid[1] - grid[0];
    const double sigma = kernel_width > 0.0 ? kernel_width : 2.0 * spacing;
    const double norm = 1.0 / (std::sqrt(kTwoPi) * sigma);

    NoiseSpectrum out;
    out.grid = grid;
    out.values.assign(grid.size(), 0.0);
    out.component = SpectrumComponent::Parallel;

    // Kernels are truncated at 6 sigma; a line whose center falls outside
    // the grid is clipped power, reported as an error below.
    const double window = 6.0 * sigma;
    double clipped = 0.0;
    double total = 0.0;
    for (int i = 0; i < bath.n_nuclei; ++i) {
        const double a2 = bath.coupling[i] * bath.coupling[i];
        for (int k = 0; k < bath.n_harmonics; ++k) {
            const double power = a2 * bath.harmonic_weights[k];
            total += power;
            const double center =
                bath.frequency[static_cast<std::size_t>(i) * bath.n_harmonics + k];
            if (center < grid.front() - 1e-12 || center > grid.back() + 1e-12) {
                clipped += power;
                continue;
            }
            const auto lo = static_cast<long>(
                std::ceil((std::max(center - window, grid.front()) - grid.front()) / spacing));
            const auto hi = static_cast<long>(
                std::floor((std::min(center + window, grid.back()) - grid.front()) / spacing));
            for (long m = lo; m <= hi; ++m) {
                const double u = (grid[static_cast<std::size_t>(m)] - center) / sigma;
                out.values[static_cast<std::size_t>(m)] +=
                    power * norm * std::exp(-0.5 * u * u);
            }
        }
    }
    if (clipped > 0.0 && total > 0.0) {
        std::ostringstream msg;
        msg << "synthesize_parallel_spectrum: grid does not cover sampled frequencies; "
            << "clipped power fraction " << clipped / total;
        throw NumericalError(msg.str());
    }
    return out;
}

NoiseSpectrum synthesize_perpendicular_spectrum(const BathConfig& config,
                                                const std::vector<double>& grid) {
    validate(config);
    check_grid(grid);
    NoiseSpectrum out;
    out.grid = grid;
    out.values.resize(grid.size());
    out.component = SpectrumComponent::Perpendicular;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid[i] / config.perp_cutoff;
        out.values[i] = config.perp_amplitude / (1.0 + x * x);
    }
    return out;
}

NoiseSpectrum compose_total(const NoiseSpectrum& parallel,
                            const NoiseSpectrum& perpendicular) {
    if (parallel.grid != perpendicular.grid)
        throw ConfigError("compose_total: component grids differ");
    NoiseSpectrum out;
    out.grid = parallel.grid;
    out.values.resize(parallel.values.size());
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = parallel.values[i] + perpendicular.values[i];
    out.component = SpectrumComponent::Total;
    return out;
}

double integrated_power(const NoiseSpectrum& spectrum) {
    double acc = 0.0;
    for (std::size_t i = 1; i < spectrum.grid.size(); ++i)
        acc += 0.5 * (spectrum.values[i] + spectrum.values[i - 1]) *
               (spectrum.grid[i] - spectrum.grid[i - 1]);
    return acc;
}

double interpolate(const NoiseSpectrum& spectrum, double omega) {
    const auto& g = spectrum.grid;
    if (omega < g.front() || omega > g.back()) return 0.0;
    const auto it = std::upper_bound(g.begin(), g.end(), omega);
    if (it == g.begin()) return spectrum.values.front();
    if (it == g.end()) return spectrum.values.back();
    const std::size_t hi = static_cast<std::size_t>(it - g.begin());
    const std::size_t lo = hi - 1;
    const double t = (omega - g[lo]) / (g[hi] - g[lo]);
    return (1.0 - t) * spectrum.values[lo] + t * spectrum.values[hi];
}

}  // namespace spinspec
