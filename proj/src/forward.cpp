#include "spinspec/forward.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "spinspec/rng.hpp"
#include "spinspec/units.hpp"

namespace spinspec {

namespace {

// Simpson over one grid cell with S interpolated linearly between the cell
// endpoints; panel width tied to the filter oscillation period.
double cell_integral(const PulseSequence& seq, double w0, double w1, double s0,
                     double s1, int panels_per_period) {
    const double period = kTwoPi / seq.total_time;
    int panels = static_cast<int>(std::ceil((w1 - w0) / period * panels_per_period));
    panels = std::clamp(panels, 2, 4096);
    if (panels % 2 == 1) ++panels;
    const double h = (w1 - w0) / panels;
    auto integrand = [&](double w, double frac) {
        const double s = s0 + (s1 - s0) * frac;
        return s * filter_over_omega_sq(seq, w);
    };
    double acc = integrand(w0, 0.0) + integrand(w1, 1.0);
    for (int i = 1; i < panels; ++i) {
        const double w = w0 + i * h;
        acc += (i % 2 == 1 ? 4.0 : 2.0) * integrand(w, static_cast<double>(i) / panels);
    }
    return acc * h / 3.0;
}

double band_quadrature(const NoiseSpectrum& spectrum, const PulseSequence& seq,
                       int panels_per_period, double* filter_band_out) {
    double chi_acc = 0.0;
    double filt_acc = 0.0;
    const auto& g = spectrum.grid;
    // Leading gap [0, g0]: extend S flat at its first value.
    if (g.front() > 0.0) {
        chi_acc += cell_integral(seq, 0.0, g.front(), spectrum.values.front(),
                                 spectrum.values.front(), panels_per_period);
        filt_acc += cell_integral(seq, 0.0, g.front(), 1.0, 1.0, panels_per_period);
    }
    for (std::size_t i = 1; i < g.size(); ++i) {
        chi_acc += cell_integral(seq, g[i - 1], g[i], spectrum.values[i - 1],
                                 spectrum.values[i], panels_per_period);
        filt_acc += cell_integral(seq, g[i - 1], g[i], 1.0, 1.0, panels_per_period);
    }
    *filter_band_out = filt_acc / kPi;
    return chi_acc / kPi;
}

}  // namespace

ChiResult chi_integral(const NoiseSpectrum& spectrum, const PulseSequence& seq,
                       double rel_tol) {
    if (spectrum.grid.size() < 2)
        throw ConfigError("chi_integral: spectrum grid needs >= 2 points");
    if (seq.total_time == 0.0) return {0.0, 0.0, false};

    // Refine until the Richardson difference between passes meets rel_tol.
    double chi_band = 0.0;
    double filter_band = 0.0;
    double prev = 0.0;
    for (int pass = 0;; ++pass) {
        const int per_period = 8 << pass;
        chi_band = band_quadrature(spectrum, seq, per_period, &filter_band);
        if (pass > 0 && std::abs(chi_band - prev) <=
                            rel_tol * std::max(std::abs(chi_band), 1e-300))
            break;
        if (pass >= 5) break;
        prev = chi_band;
    }

    // Flat continuation beyond the grid: S(w > w_end) = S(w_end), integrated
    // exactly via the T/2 full-band identity for F/w^2.
    const double tail_filter = std::max(0.5 * seq.total_time - filter_band, 0.0);
    const double tail = spectrum.values.back() * tail_filter;

    ChiResult out;
    out.chi = chi_band + tail;
    out.tail_fraction = out.chi > 0.0 ? tail / out.chi : 0.0;
    out.band_clipped = out.tail_fraction > 1e-3;
    return out;
}

CoherenceCurve coherence_curve(const NoiseSpectrum& spectrum, SequenceKind kind,
                               int n_pi, const std::vector<double>& t_grid,
                               const EnvelopeParams& env, double field_b_tesla) {
    if (!(env.t1_us > 0.0)) throw ConfigError("coherence_curve: T1 must be > 0");
    if (env.quasistatic_sigma < 0.0)
        throw ConfigError("coherence_curve: quasistatic_sigma must be >= 0");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1]))
            throw ConfigError("coherence_curve: T grid must be strictly increasing");

    CoherenceCurve curve;
    curve.kind = kind;
    curve.n_pi = n_pi;
    curve.field_b_tesla = field_b_tesla;
    curve.provenance = Provenance::Quadrature;
    curve.samples.reserve(t_grid.size());
    for (double t : t_grid) {
        double chi = 0.0;
        if (t > 0.0) {
            const PulseSequence seq = build_sequence(kind, n_pi, t);
            chi = chi_integral(spectrum, seq).chi;
        }
        double c = std::exp(-chi) * std::exp(-t / env.t1_us);
        if (kind == SequenceKind::Ramsey) {
            const double q = env.quasistatic_sigma * t;
            c *= std::exp(-0.5 * q * q);
        }
        curve.samples.push_back({t, c, 0.0});
    }
    return curve;
}

namespace {

struct McModes {
    std::vector<double> amplitude;  // sqrt(2 S dw / pi)
    std::vector<double> omega;
};

McModes build_modes(const NoiseSpectrum& spectrum, double t_max, double mode_spacing) {
    double min_spacing = spectrum.grid.back();
    for (std::size_t i = 1; i < spectrum.grid.size(); ++i)
        min_spacing = std::min(min_spacing, spectrum.grid[i] - spectrum.grid[i - 1]);
    double dw = mode_spacing;
    if (dw <= 0.0) {
        dw = 0.5 * min_spacing;
        if (t_max > 0.0) dw = std::min(dw, kTwoPi / (10.0 * t_max));
    }
    McModes modes;
    for (double w = 0.5 * dw; w <= spectrum.grid.back(); w += dw) {
        const double s = interpolate(spectrum, w);
        modes.omega.push_back(w);
        modes.amplitude.push_back(std::sqrt(2.0 * s * dw / kPi));
    }
    if (modes.omega.size() < 2)
        throw NumericalError("mc_coherence: fewer than 2 modes in band");
    return modes;
}

}  // namespace

CoherenceCurve mc_coherence(const NoiseSpectrum& spectrum, SequenceKind kind,
                            int n_pi, const std::vector<double>& t_grid,
                            const McOptions& opts) {
    if (opts.n_realizations < 100)
        throw ConfigError("mc_coherence: n_realizations must be >= 100");
    const double t_max = t_grid.empty() ? 0.0 : t_grid.back();
    const McModes modes = build_modes(spectrum, t_max, opts.mode_spacing);
    const std::size_t n_modes = modes.omega.size();

    CoherenceCurve curve;
    curve.kind = kind;
    curve.n_pi = n_pi;
    curve.provenance = Provenance::MonteCarlo;
    curve.seed = opts.seed;
    curve.samples.reserve(t_grid.size());

    int n_threads = opts.n_threads > 0
                        ? opts.n_threads
                        : static_cast<int>(std::thread::hardware_concurrency());
    if (n_threads < 1) n_threads = 1;

    for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
        const double t = t_grid[ti];
        if (!(t > 0.0)) {
            curve.samples.push_back({t, 1.0, 0.0});
            continue;
        }
        const PulseSequence seq = build_sequence(kind, n_pi, t);

        // phase = sum_m amp_m * Re[e^{i phi_m} y(w_m)]; precompute y once.
        std::vector<double> re(n_modes), im(n_modes);
        for (std::size_t m = 0; m < n_modes; ++m) {
            const auto y = switching_transform(seq, modes.omega[m]);
            re[m] = modes.amplitude[m] * y.real();
            im[m] = modes.amplitude[m] * y.imag();
        }

        // Fixed-size chunks with per-realization seeds; partial sums are
        // combined in chunk order so the result is independent of the
        // worker count.
        constexpr int kChunk = 512;
        const int n_chunks = (opts.n_realizations + kChunk - 1) / kChunk;
        std::vector<double> chunk_sum(n_chunks, 0.0), chunk_sq(n_chunks, 0.0);

        auto run_chunks = [&](int first, int step) {
            for (int c = first; c < n_chunks; c += step) {
                double acc = 0.0, acc_sq = 0.0;
                const int lo = c * kChunk;
                const int hi = std::min(lo + kChunk, opts.n_realizations);
                for (int r = lo; r < hi; ++r) {
                    auto engine =
                        make_engine(opts.seed, (static_cast<std::uint64_t>(ti) << 32) |
                                                   static_cast<std::uint64_t>(r));
                    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
                    double phi_total = 0.0;
                    for (std::size_t m = 0; m < n_modes; ++m) {
                        const double p = phase(engine);
                        phi_total += std::cos(p) * re[m] - std::sin(p) * im[m];
                    }
                    const double v = std::cos(phi_total);
                    acc += v;
                    acc_sq += v * v;
                }
                chunk_sum[c] = acc;
                chunk_sq[c] = acc_sq;
            }
        };

        if (n_threads == 1) {
            run_chunks(0, 1);
        } else {
            std::vector<std::thread> pool;
            pool.reserve(static_cast<std::size_t>(n_threads));
            for (int w = 0; w < n_threads; ++w)
                pool.emplace_back(run_chunks, w, n_threads);
            for (auto& th : pool) th.join();
        }

        double sum = 0.0, sum_sq = 0.0;
        for (int c = 0; c < n_chunks; ++c) {
            sum += chunk_sum[c];
            sum_sq += chunk_sq[c];
        }
        const double n = opts.n_realizations;
        const double mean = sum / n;
        const double var = std::max(sum_sq / n - mean * mean, 0.0);
        curve.samples.push_back({t, mean, std::sqrt(var / (n - 1.0))});
    }
    return curve;
}

}  // namespace spinspec
