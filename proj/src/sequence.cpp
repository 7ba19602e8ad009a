#include "spinspec/sequence.hpp"

#include <cmath>
#include <stdexcept>

#include "spinspec/units.hpp"

namespace spinspec {

PulseSequence build_sequence(SequenceKind kind, int n_pi, double total_time) {
    if (!(total_time > 0.0))
        throw ConfigError("build_sequence: total_time must be > 0");
    if (n_pi < 0)
        throw ConfigError("build_sequence: n_pi must be >= 0");
    if (kind == SequenceKind::Ramsey && n_pi != 0)
        throw ConfigError("build_sequence: Ramsey sequence cannot carry pi pulses");
    if (kind == SequenceKind::Cpmg && n_pi < 1)
        throw ConfigError("build_sequence: CPMG needs n_pi >= 1");

    PulseSequence seq;
    seq.kind = kind;
    seq.n_pi = n_pi;
    seq.total_time = total_time;
    seq.pi_times.reserve(static_cast<std::size_t>(n_pi));
    for (int j = 1; j <= n_pi; ++j)
        seq.pi_times.push_back(total_time * (2.0 * j - 1.0) / (2.0 * n_pi));
    return seq;
}

int switching_value(const PulseSequence& seq, double t) {
    if (t < 0.0 || t > seq.total_time)
        throw ConfigError("switching_value: t outside [0, T]");
    int s = 1;
    for (double tp : seq.pi_times) {
        if (t < tp) break;
        s = -s;
    }
    return s;
}

std::complex<double> switching_transform(const PulseSequence& seq, double omega) {
    // Sum over constant-sign segments [t_j, t_{j+1}]:
    //   s_j * e^{i w t_j} * integral_0^d e^{i w u} du
    // with the segment integral written as (sin(wd) + i*2 sin^2(wd/2))/w,
    // which has no subtractive cancellation at small wd.
    std::complex<double> y(0.0, 0.0);
    double t0 = 0.0;
    int sign = 1;
    const std::size_t n_seg = seq.pi_times.size() + 1;
    for (std::size_t j = 0; j < n_seg; ++j) {
        const double t1 = (j < seq.pi_times.size()) ? seq.pi_times[j] : seq.total_time;
        const double d = t1 - t0;
        std::complex<double> seg;
        if (omega == 0.0) {
            seg = {d, 0.0};
        } else {
            const double h = 0.5 * omega * d;
            const double sh = std::sin(h);
            seg = {std::sin(omega * d) / omega, 2.0 * sh * sh / omega};
        }
        y += static_cast<double>(sign) *
             std::complex<double>(std::cos(omega * t0), std::sin(omega * t0)) * seg;
        t0 = t1;
        sign = -sign;
    }
    return y;
}

double filter_over_omega_sq(const PulseSequence& seq, double omega) {
    const std::complex<double> y = switching_transform(seq, omega);
    return 0.5 * std::norm(y);
}

double filter_value(const PulseSequence& seq, double omega) {
    return omega * omega * filter_over_omega_sq(seq, omega);
}

std::optional<double> filter_closed_form(int n_pi, double z) {
    if (n_pi < 0) throw ConfigError("filter_closed_form: n_pi must be >= 0");
    const double s_half = std::sin(0.5 * z);
    if (n_pi == 0) return 2.0 * s_half * s_half;

    const double c = std::cos(0.5 * z / n_pi);
    // 0/0 at the comb peaks; let the segment sum take over there.
    if (std::abs(c) < 1e-8) return std::nullopt;

    const double s4 = std::sin(0.25 * z / n_pi);
    double f = 8.0 * s4 * s4 * s4 * s4 / (c * c);
    if (n_pi % 2 == 0) {
        f *= s_half * s_half;
    } else {
        const double c_half = std::cos(0.5 * z);
        f *= c_half * c_half;
    }
    return f;
}

std::vector<Harmonic> harmonic_weights(int n_pi, double tau, int k_max) {
    if (n_pi < 1) throw ConfigError("harmonic_weights: n_pi must be >= 1");
    if (!(tau > 0.0)) throw ConfigError("harmonic_weights: tau must be > 0");
    if (k_max < 1 || k_max % 2 == 0)
        throw ConfigError("harmonic_weights: k_max must be odd and >= 1");

    std::vector<Harmonic> out;
    out.reserve(static_cast<std::size_t>((k_max + 1) / 2));
    for (int k = 1; k <= k_max; k += 2)
        out.push_back({k * kPi / tau, 4.0 / (kPi * kPi * k * k)});
    return out;
}

namespace {

// Composite Simpson over [a, b] with panel count chosen from the filter
// oscillation period 2 pi / T.
double simpson_panels(const PulseSequence& seq, double a, double b, int panels) {
    const double h = (b - a) / panels;
    double acc = filter_over_omega_sq(seq, a) + filter_over_omega_sq(seq, b);
    for (int i = 1; i < panels; ++i)
        acc += (i % 2 == 1 ? 4.0 : 2.0) * filter_over_omega_sq(seq, a + i * h);
    return acc * h / 3.0;
}

}  // namespace

double filter_band_integral(const PulseSequence& seq, double omega_lo,
                            double omega_hi, double rel_tol) {
    if (omega_hi <= omega_lo) return 0.0;
    const double period = kTwoPi / seq.total_time;

    // panels per oscillation period; doubled until the Richardson estimate
    // meets rel_tol.
    int per_period = 8;
    double prev = 0.0;
    for (int pass = 0; pass < 6; ++pass) {
        const double span = omega_hi - omega_lo;
        long n_panels = static_cast<long>(std::ceil(span / period * per_period));
        if (n_panels < 8) n_panels = 8;
        if (n_panels % 2 == 1) ++n_panels;
        if (n_panels > 4'000'000L)
            throw NumericalError("filter_band_integral: panel budget exceeded");
        const double cur =
            simpson_panels(seq, omega_lo, omega_hi, static_cast<int>(n_panels));
        if (pass > 0) {
            const double err = std::abs(cur - prev);
            if (err <= rel_tol * std::max(std::abs(cur), 1e-300)) return cur / kPi;
        }
        prev = cur;
        per_period *= 2;
    }
    return prev / kPi;
}

}  // namespace spinspec
