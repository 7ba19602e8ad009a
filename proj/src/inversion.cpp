#include "spinspec/inversion.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "spinspec/units.hpp"

namespace spinspec {

namespace {

constexpr double kW1 = 4.0 / (kPi * kPi);  // leading comb weight

struct ChiEquation {
    double omega = 0.0;   // n pi / T
    double x = 0.0;       // chi / T
    double sigma_x = 0.0;
    double t = 0.0;
    int n_pi = 0;
};

// chi_i = -ln( C_i / exp(-T/T1) ); samples with C/envelope below the floor
// carry no usable information and are dropped.
std::vector<ChiEquation> extract_chi(const std::vector<CoherenceCurve>& curves,
                                     double c_floor, double t1_us) {
    std::vector<ChiEquation> eqs;
    for (const auto& curve : curves) {
        if (curve.kind != SequenceKind::Cpmg || curve.n_pi < 1)
            throw ConfigError("decompose: inversion consumes CPMG curves with n_pi >= 1");
        for (const auto& s : curve.samples) {
            if (!(s.time_us > 0.0)) continue;
            const double envelope = std::exp(-s.time_us / t1_us);
            const double c_net = s.coherence / envelope;
            if (c_net < c_floor) continue;
            ChiEquation eq;
            eq.t = s.time_us;
            eq.n_pi = curve.n_pi;
            eq.omega = curve.n_pi * kPi / s.time_us;
            eq.x = -std::log(c_net) / s.time_us;
            eq.sigma_x = s.coherence > 0.0 ? (s.sigma / s.coherence) / s.time_us : 0.0;
            eqs.push_back(eq);
        }
    }
    return eqs;
}

struct SolvedPoint {
    double omega;
    double s;
    double sigma;
};

// Linear interpolation on the descending solved table.  Returns false when
// the requested frequency lies above the covered range (below cutoff), i.e.
// no curve coverage exists there.
bool interp_solved(const std::vector<SolvedPoint>& solved, double omega, double* s_out,
                   double* sigma_out) {
    if (solved.empty() || omega > solved.front().omega * (1.0 + 1e-12)) return false;
    if (omega >= solved.front().omega) {
        *s_out = solved.front().s;
        *sigma_out = solved.front().sigma;
        return true;
    }
    // solved is descending in omega
    auto it = std::lower_bound(solved.begin(), solved.end(), omega,
                               [](const SolvedPoint& p, double w) { return p.omega > w; });
    if (it == solved.end()) {
        *s_out = solved.back().s;
        *sigma_out = solved.back().sigma;
        return true;
    }
    if (it == solved.begin()) {
        *s_out = solved.front().s;
        *sigma_out = solved.front().sigma;
        return true;
    }
    const SolvedPoint& hi = *(it - 1);
    const SolvedPoint& lo = *it;
    const double f = (omega - lo.omega) / (hi.omega - lo.omega);
    *s_out = lo.s + f * (hi.s - lo.s);
    *sigma_out = lo.sigma + f * (hi.sigma - lo.sigma);
    return true;
}

}  // namespace

DecompositionResult decompose_recursive(const std::vector<CoherenceCurve>& curves,
                                        const RecursiveOptions& opts) {
    if (opts.k_max < 1 || opts.k_max % 2 == 0)
        throw ConfigError("decompose_recursive: k_max must be odd");
    if (!(opts.omega_cutoff > 0.0))
        throw ConfigError("decompose_recursive: omega_cutoff must be > 0");

    std::vector<ChiEquation> eqs = extract_chi(curves, opts.c_floor, opts.t1_us);
    if (eqs.empty()) throw NumericalError("decompose_recursive: no usable samples");

    // Group equations by target frequency (weighted mean of chi/T per group),
    // keeping only targets within the cutoff.
    std::map<double, std::vector<ChiEquation>> groups;
    for (const auto& eq : eqs) {
        if (eq.omega > opts.omega_cutoff) continue;
        bool merged = false;
        auto it = groups.lower_bound(eq.omega * (1.0 - 1e-9));
        if (it != groups.end() && std::abs(it->first - eq.omega) <= 1e-9 * eq.omega) {
            it->second.push_back(eq);
            merged = true;
        }
        if (!merged) groups[eq.omega].push_back(eq);
    }
    if (groups.empty())
        throw NumericalError("decompose_recursive: no targets below the cutoff");

    std::vector<SolvedPoint> solved;  // descending omega
    std::vector<char> valid_desc;
    std::vector<double> raw_desc;
    solved.reserve(groups.size());

    for (auto it = groups.rbegin(); it != groups.rend(); ++it) {
        const double omega = it->first;
        double x_bar = 0.0, weight_sum = 0.0, var = 0.0;
        const bool have_sigma =
            std::all_of(it->second.begin(), it->second.end(),
                        [](const ChiEquation& e) { return e.sigma_x > 0.0; });
        if (have_sigma) {
            for (const auto& eq : it->second) {
                const double w = 1.0 / (eq.sigma_x * eq.sigma_x);
                x_bar += w * eq.x;
                weight_sum += w;
            }
            x_bar /= weight_sum;
            var = 1.0 / weight_sum;
        } else {
            for (const auto& eq : it->second) x_bar += eq.x;
            x_bar /= static_cast<double>(it->second.size());
            for (const auto& eq : it->second) var += eq.sigma_x * eq.sigma_x;
            var /= static_cast<double>(it->second.size() * it->second.size());
        }

        // Subtract the harmonic ladder using already-solved values.
        double harm = 0.0, harm_var = 0.0;
        bool covered = true;
        for (int k = 3; k <= opts.k_max; k += 2) {
            const double wk = 4.0 / (kPi * kPi * k * k);
            const double target = k * omega;
            if (target > opts.omega_cutoff) break;  // S = 0 beyond the cutoff
            double s_k = 0.0, sigma_k = 0.0;
            if (!interp_solved(solved, target, &s_k, &sigma_k)) {
                covered = false;  // flagged missing, not interpolated silently
                continue;
            }
            harm += wk * s_k;
            harm_var += (wk / kW1) * (wk / kW1) * sigma_k * sigma_k;
        }

        const double s_value = (x_bar - harm) / kW1;
        const double sigma_s = std::sqrt(var / (kW1 * kW1) + harm_var);
        solved.push_back({omega, s_value, sigma_s});
        raw_desc.push_back(s_value);
        valid_desc.push_back(covered ? 1 : 0);
    }

    DecompositionResult out;
    out.method = DecompositionMethod::Recursive;
    const std::size_t n = solved.size();
    out.grid.resize(n);
    out.s_hat.resize(n);
    out.sigma_s.resize(n);
    out.s_raw.resize(n);
    out.valid.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = n - 1 - i;  // ascending output
        out.grid[i] = solved[j].omega;
        out.s_raw[i] = raw_desc[j];
        out.s_hat[i] = std::max(raw_desc[j], 0.0);
        out.sigma_s[i] = solved[j].sigma;
        out.valid[i] = valid_desc[j];
    }
    return out;
}

DecompositionResult decompose_lsq(const std::vector<CoherenceCurve>& curves,
                                  const LsqOptions& opts) {
    const std::size_t m = opts.bin_edges.size() < 2 ? 0 : opts.bin_edges.size() - 1;
    if (m < 2) throw ConfigError("decompose_lsq: need at least 2 bins");
    for (std::size_t i = 1; i < opts.bin_edges.size(); ++i)
        if (!(opts.bin_edges[i] > opts.bin_edges[i - 1]))
            throw ConfigError("decompose_lsq: bin edges must be increasing");

    std::vector<ChiEquation> eqs = extract_chi(curves, opts.c_floor, opts.t1_us);
    if (eqs.size() < m) throw NumericalError("decompose_lsq: fewer equations than bins");

    const auto n_eq = static_cast<Eigen::Index>(eqs.size());
    const auto n_bins = static_cast<Eigen::Index>(m);

    // Design matrix: chi_i = sum_m S_m * (1/pi) int_bin_m F_i / w^2 dw.
    Eigen::MatrixXd design(n_eq, n_bins);
    Eigen::VectorXd rhs(n_eq);
    for (Eigen::Index i = 0; i < n_eq; ++i) {
        const PulseSequence seq = build_sequence(SequenceKind::Cpmg, eqs[i].n_pi, eqs[i].t);
        for (Eigen::Index b = 0; b < n_bins; ++b)
            design(i, b) = filter_band_integral(seq, opts.bin_edges[b],
                                                opts.bin_edges[b + 1], 1e-7);
        const double w = eqs[i].sigma_x > 0.0 ? 1.0 / (eqs[i].sigma_x * eqs[i].t) : 1.0;
        design.row(i) *= w;
        rhs(i) = eqs[i].x * eqs[i].t * w;
    }

    // Augment with the scaled second-difference operator.
    const Eigen::Index n_reg = n_bins >= 2 ? n_bins - 2 : 0;
    const double scale = design.cwiseAbs().maxCoeff();
    Eigen::MatrixXd a(n_eq + n_reg, n_bins);
    Eigen::VectorXd b(n_eq + n_reg);
    a.topRows(n_eq) = design;
    b.head(n_eq) = rhs;
    a.bottomRows(n_reg).setZero();
    b.tail(n_reg).setZero();
    const double reg = std::sqrt(opts.lambda) * scale;
    for (Eigen::Index r = 0; r < n_reg; ++r) {
        a(n_eq + r, r) = reg;
        a(n_eq + r, r + 1) = -2.0 * reg;
        a(n_eq + r, r + 2) = reg;
    }

    // Lawson-Hanson NNLS on the augmented system.
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_bins);
    std::vector<bool> passive(m, false);
    Eigen::VectorXd residual = b;
    int iterations = 0;
    while (true) {
        Eigen::VectorXd gradient = a.transpose() * residual;
        Eigen::Index best = -1;
        double best_g = 1e-10 * scale * std::max(1.0, b.norm());
        for (Eigen::Index j = 0; j < n_bins; ++j)
            if (!passive[static_cast<std::size_t>(j)] && gradient(j) > best_g) {
                best_g = gradient(j);
                best = j;
            }
        if (best < 0) break;
        passive[static_cast<std::size_t>(best)] = true;

        while (true) {
            if (++iterations > opts.max_iterations) {
                std::ostringstream msg;
                msg << "decompose_lsq: no convergence after " << opts.max_iterations
                    << " iterations; residual " << residual.norm();
                throw NumericalError(msg.str());
            }
            std::vector<Eigen::Index> idx;
            for (Eigen::Index j = 0; j < n_bins; ++j)
                if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
            Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
            for (std::size_t j = 0; j < idx.size(); ++j) sub.col(j) = a.col(idx[j]);
            Eigen::VectorXd z = sub.colPivHouseholderQr().solve(b);

            bool feasible = true;
            for (std::size_t j = 0; j < idx.size(); ++j)
                if (z(static_cast<Eigen::Index>(j)) <= 0.0) feasible = false;
            if (feasible) {
                x.setZero();
                for (std::size_t j = 0; j < idx.size(); ++j)
                    x(idx[j]) = z(static_cast<Eigen::Index>(j));
                break;
            }
            // step back to the feasibility boundary and drop offending bins
            double alpha = 1.0;
            for (std::size_t j = 0; j < idx.size(); ++j) {
                const double zj = z(static_cast<Eigen::Index>(j));
                const double xj = x(idx[j]);
                if (zj <= 0.0 && xj - zj > 0.0)
                    alpha = std::min(alpha, xj / (xj - zj));
            }
            for (std::size_t j = 0; j < idx.size(); ++j) {
                const double zj = z(static_cast<Eigen::Index>(j));
                x(idx[j]) += alpha * (zj - x(idx[j]));
                if (x(idx[j]) <= 1e-14 * std::abs(scale)) {
                    x(idx[j]) = 0.0;
                    passive[static_cast<std::size_t>(idx[j])] = false;
                }
            }
        }
        residual = b - a * x;
    }

    // Ridge covariance from the augmented normal matrix.
    Eigen::MatrixXd normal = a.transpose() * a;
    normal.diagonal().array() += 1e-12 * normal.diagonal().maxCoeff();
    const Eigen::MatrixXd cov = normal.inverse();
    const double dof = std::max<double>(1.0, static_cast<double>(n_eq) - static_cast<double>(n_bins));
    const double s2 = residual.head(n_eq).squaredNorm() / dof;

    DecompositionResult out;
    out.method = DecompositionMethod::Lsq;
    out.grid.resize(m);
    out.s_hat.resize(m);
    out.s_raw.resize(m);
    out.sigma_s.resize(m);
    out.valid.assign(m, 1);
    for (std::size_t j = 0; j < m; ++j) {
        out.grid[j] = 0.5 * (opts.bin_edges[j] + opts.bin_edges[j + 1]);
        out.s_raw[j] = x(static_cast<Eigen::Index>(j));
        out.s_hat[j] = std::max(out.s_raw[j], 0.0);
        out.sigma_s[j] =
            std::sqrt(std::max(0.0, s2 * cov(static_cast<Eigen::Index>(j),
                                             static_cast<Eigen::Index>(j))));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Nonlinear fits (shared Levenberg-Marquardt core)
// ---------------------------------------------------------------------------

namespace {

struct LmProblem {
    // residual r_i and Jacobian row dr_i/dtheta for data index i
    std::function<double(const Eigen::VectorXd&, std::size_t, Eigen::VectorXd*)> residual;
    std::size_t n_data = 0;
};

struct LmResult {
    Eigen::VectorXd theta;
    Eigen::MatrixXd covariance;
    double cost = 0.0;
    bool converged = false;
};

LmResult levenberg_marquardt(const LmProblem& prob, Eigen::VectorXd theta,
                             int max_iter = 300) {
    const auto n_par = theta.size();
    double lambda = 1e-3;

    auto evaluate = [&](const Eigen::VectorXd& th, Eigen::VectorXd& r,
                        Eigen::MatrixXd& jac) {
        r.resize(static_cast<Eigen::Index>(prob.n_data));
        jac.resize(static_cast<Eigen::Index>(prob.n_data), n_par);
        Eigen::VectorXd row(n_par);
        for (std::size_t i = 0; i < prob.n_data; ++i) {
            r(static_cast<Eigen::Index>(i)) = prob.residual(th, i, &row);
            jac.row(static_cast<Eigen::Index>(i)) = row;
        }
    };

    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    evaluate(theta, r, jac);
    double cost = r.squaredNorm();

    LmResult out;
    out.converged = false;
    for (int iter = 0; iter < max_iter; ++iter) {
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * r;
        Eigen::MatrixXd lhs = jtj;
        lhs.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
        const Eigen::VectorXd step = lhs.ldlt().solve(-jtr);

        const Eigen::VectorXd trial = theta + step;
        Eigen::VectorXd r_trial;
        Eigen::MatrixXd jac_trial;
        evaluate(trial, r_trial, jac_trial);
        const double cost_trial = r_trial.squaredNorm();

        if (cost_trial < cost) {
            const double improvement = (cost - cost_trial) / std::max(cost, 1e-300);
            theta = trial;
            r = r_trial;
            jac = jac_trial;
            cost = cost_trial;
            lambda = std::max(lambda * 0.3, 1e-12);
            if (improvement < 1e-12 && step.norm() < 1e-10 * (1.0 + theta.norm())) {
                out.converged = true;
                break;
            }
        } else {
            lambda *= 4.0;
            if (lambda > 1e12) {
                out.converged = true;  // stuck at a (local) optimum
                break;
            }
        }
    }

    Eigen::MatrixXd jtj = jac.transpose() * jac;
    jtj.diagonal().array() += 1e-300;
    const double dof =
        std::max<double>(1.0, static_cast<double>(prob.n_data) - static_cast<double>(n_par));
    out.theta = theta;
    out.covariance = jtj.inverse() * (cost / dof);
    out.cost = cost;
    return out;
}

}  // namespace

GaussianFit fit_gaussian(const DecompositionResult& result) {
    std::vector<double> f, y, sig;
    for (std::size_t i = 0; i < result.grid.size(); ++i) {
        if (!result.valid[i]) continue;
        f.push_back(rad_per_us_to_mhz(result.grid[i]));
        y.push_back(result.s_hat[i]);
        sig.push_back(result.sigma_s[i]);
    }
    if (f.size() < 6) throw ConfigError("fit_gaussian: need >= 6 valid grid points");

    const double y_max = *std::max_element(y.begin(), y.end());
    const double y_min = *std::min_element(y.begin(), y.end());
    if (!(y_max - y_min > 1e-12 * std::max(1.0, std::abs(y_max))) || y_max <= 0.0)
        throw NumericalError("fit_gaussian: degenerate fit (flat data)");

    // Noise floor for the weights so noiseless input does not produce
    // infinite weights.
    const double sigma_floor = 1e-6 * y_max;
    std::vector<double> weight(sig.size());
    for (std::size_t i = 0; i < sig.size(); ++i)
        weight[i] = 1.0 / std::max(sig[i], sigma_floor);

    // theta = (baseline, amplitude, center, ln width)
    auto make_problem = [&]() {
        LmProblem prob;
        prob.n_data = f.size();
        prob.residual = [&](const Eigen::VectorXd& th, std::size_t i,
                            Eigen::VectorXd* jac_row) {
            const double base = th(0), amp = th(1), center = th(2);
            const double width = std::exp(th(3));
            const double u = (f[i] - center) / width;
            const double g = std::exp(-0.5 * u * u);
            const double model = base + amp * g;
            if (jac_row) {
                (*jac_row)(0) = weight[i];
                (*jac_row)(1) = weight[i] * g;
                (*jac_row)(2) = weight[i] * amp * g * u / width;
                (*jac_row)(3) = weight[i] * amp * g * u * u;  // d/d(ln w)
            }
            return weight[i] * (model - y[i]);
        };
        return prob;
    };

    const std::size_t i_max =
        static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    const double span = f.back() - f.front();
    auto quantile = [&](double q) { return f.front() + q * span; };

    const LmProblem prob = make_problem();
    LmResult best;
    best.cost = std::numeric_limits<double>::infinity();
    const double centers[5] = {f[i_max], quantile(0.25), quantile(0.5), quantile(0.75),
                               quantile(0.35)};
    for (double c0 : centers) {
        Eigen::VectorXd theta(4);
        theta << y_min, std::max(y_max - y_min, 1e-12 * y_max), c0,
            std::log(std::max(span / 6.0, 1e-6));
        const LmResult fit = levenberg_marquardt(prob, theta);
        if (fit.cost < best.cost) best = fit;
    }

    GaussianFit out;
    out.baseline = best.theta(0);
    out.amplitude = best.theta(1);
    out.center_mhz = best.theta(2);
    out.width_mhz = std::exp(best.theta(3));
    out.residual_norm = std::sqrt(best.cost);
    if (!(out.width_mhz > 0.0) || out.amplitude < 0.0)
        throw NumericalError("fit_gaussian: fit collapsed to an invalid optimum");

    // Covariance back in natural parameters, ordered
    // (center, amplitude, width, baseline); d width / d ln width = width.
    const int map_idx[4] = {2, 1, 3, 0};
    const double jac_nat[4] = {1.0, 1.0, out.width_mhz, 1.0};
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            out.covariance[r][c] = best.covariance(map_idx[r], map_idx[c]) *
                                   jac_nat[r] * jac_nat[c];
    return out;
}

StretchedExpFit fit_stretched_exp(const CoherenceCurve& curve) {
    std::vector<double> t, c, sig;
    for (const auto& s : curve.samples) {
        if (!(s.time_us > 0.0)) continue;
        t.push_back(s.time_us);
        c.push_back(s.coherence);
        sig.push_back(s.sigma);
    }
    if (t.size() < 8) throw ConfigError("fit_stretched_exp: need >= 8 samples");

    const double c0 = c.front();
    if (!(c0 > 0.0)) throw NumericalError("fit_stretched_exp: non-positive initial value");
    // span at least one decay constant
    const double c_tail = *std::min_element(c.begin(), c.end());
    if (c_tail > c0 * std::exp(-1.0) * 1.05)
        throw NumericalError("fit_stretched_exp: data does not decay through 1/e");

    // deterministic T2* init from the 1/e crossing
    double t2_init = t.back();
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (c[i] <= c0 * std::exp(-1.0)) {
            const double c_hi = c[i - 1], c_lo = c[i];
            const double target = c0 * std::exp(-1.0);
            const double frac = c_hi > c_lo ? (c_hi - target) / (c_hi - c_lo) : 0.5;
            t2_init = t[i - 1] + frac * (t[i] - t[i - 1]);
            break;
        }
    }

    const double sigma_floor = 1e-4 * c0;
    std::vector<double> weight(sig.size());
    for (std::size_t i = 0; i < sig.size(); ++i)
        weight[i] = 1.0 / std::max(sig[i], sigma_floor);

    // theta = (a, ln T2*, p)
    LmProblem prob;
    prob.n_data = t.size();
    prob.residual = [&](const Eigen::VectorXd& th, std::size_t i,
                        Eigen::VectorXd* jac_row) {
        const double a = th(0);
        const double t2 = std::exp(th(1));
        const double p = th(2);
        const double u = t[i] / t2;
        const double up = std::pow(u, p);
        const double e = std::exp(-up);
        if (jac_row) {
            (*jac_row)(0) = weight[i] * e;
            (*jac_row)(1) = weight[i] * a * e * up * p;        // d/d(ln T2)
            (*jac_row)(2) = -weight[i] * a * e * up * std::log(u);
        }
        return weight[i] * (a * e - c[i]);
    };

    Eigen::VectorXd theta(3);
    theta << c0, std::log(t2_init), 2.0;
    const LmResult fit = levenberg_marquardt(prob, theta);

    StretchedExpFit out;
    out.amplitude = fit.theta(0);
    out.t2_star_us = std::exp(fit.theta(1));
    out.exponent = fit.theta(2);
    out.residual_norm = std::sqrt(fit.cost);
    if (!(out.amplitude > 0.0) || out.amplitude > 1.0 + 1e-6 ||
        !(out.t2_star_us > 0.0) || out.exponent <= 0.5 || out.exponent >= 4.0)
        throw NumericalError("fit_stretched_exp: optimum violates parameter bounds");

    const double jac_nat[3] = {1.0, out.t2_star_us, 1.0};
    for (int r = 0; r < 3; ++r)
        for (int c2 = 0; c2 < 3; ++c2)
            out.covariance[r][c2] = fit.covariance(r, c2) * jac_nat[r] * jac_nat[c2];
    return out;
}

}  // namespace spinspec
