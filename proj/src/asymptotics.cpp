#include "fgsmglm/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fgsmglm/estimators.hpp"
#include "fgsmglm/stats.hpp"

namespace fgsmglm {

namespace {

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double abs_pow(double v, double g) {
    const double t = std::fabs(v);
    if (g == 1.0) return t;
    if (g == 2.0) return t * t;
    return std::pow(t, g);
}

double gamma_norm(const VectorXd& beta, double gamma) {
    double total = 0.0;
    for (int j = 0; j < beta.size(); ++j) total += abs_pow(beta[j], gamma);
    return total;
}

}  // namespace

void LimitProblem::validate() const {
    if (!(lambda0 >= 0.0)) throw std::invalid_argument("lambda0 must be >= 0");
    if (!(radius_K > 0.0)) throw std::invalid_argument("radius_K must be > 0");
    if (penalty_case == PenaltyCase::LGammaGT1 && !(gamma > 1.0))
        throw std::invalid_argument("LGammaGT1 requires gamma > 1");
    if (penalty_case == PenaltyCase::LGammaLT1 && !(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("LGammaLT1 requires 0 < gamma < 1");
    if (moments.M.rows() != beta0.size() || moments.M.cols() != beta0.size())
        throw std::invalid_argument("moment matrix dimension does not match beta0");
}

PenaltyCase penalty_case_for(const PenaltySpec& spec) {
    switch (spec.family) {
        case PenaltyFamily::Lasso: return PenaltyCase::Lasso;
        case PenaltyFamily::Scad: return PenaltyCase::Scad;
        case PenaltyFamily::LGamma:
            if (spec.gamma == 1.0) return PenaltyCase::Lasso;
            return spec.gamma > 1.0 ? PenaltyCase::LGammaGT1 : PenaltyCase::LGammaLT1;
    }
    throw std::logic_error("unreachable penalty family");
}

MomentSummary compute_moments(const ModelSpec& model, long mc_samples, std::uint64_t seed) {
    model.validate();
    if (mc_samples < 2) throw std::invalid_argument("mc_samples must be >= 2");
    const int p = model.p();
    Rng rng(mix_seed(seed, {0x303e275ULL}));

    MatrixXd sum_m = MatrixXd::Zero(p, p), sum_m2 = MatrixXd::Zero(p, p);
    VectorXd sum_v = VectorXd::Zero(p), sum_v2 = VectorXd::Zero(p);
    double sum_e = 0.0, sum_e2 = 0.0;
    for (long s = 0; s < mc_samples; ++s) {
        const VectorXd x = model.covariates.sample(rng);
        const double theta = x.dot(model.beta0);
        double y;
        if (model.link.family() == Family::LinearGaussian)
            y = theta + model.link.sigma() * rng.normal();
        else
            y = rng.bernoulli(model.link.b1(theta)) ? 1.0 : 0.0;
        const double eps = y - model.link.b1(theta);
        const double w = model.link.b2(theta);
        const MatrixXd m_term = w * (x * x.transpose());
        const VectorXd v_term = w * sgn(eps) * x;
        sum_m += m_term;
        sum_m2 += m_term.cwiseProduct(m_term);
        sum_v += v_term;
        sum_v2 += v_term.cwiseProduct(v_term);
        sum_e += std::fabs(eps);
        sum_e2 += eps * eps;
    }
    const double m = static_cast<double>(mc_samples);
    MomentSummary out;
    out.mc_samples = mc_samples;
    out.M = sum_m / m;
    out.V = sum_v / m;
    out.mean_abs_eps = sum_e / m;
    out.se_M = ((sum_m2 / m - out.M.cwiseProduct(out.M)).cwiseMax(0.0) / m).cwiseSqrt();
    out.se_V = ((sum_v2 / m - out.V.cwiseProduct(out.V)).cwiseMax(0.0) / m).cwiseSqrt();
    out.se_mean_abs_eps =
        std::sqrt(std::max(sum_e2 / m - out.mean_abs_eps * out.mean_abs_eps, 0.0) / m);
    // Symmetrize away MC round-off.
    out.M = 0.5 * (out.M + out.M.transpose()).eval();
    if (model.link.family() == Family::LinearGaussian) {
        out.analytic_V = VectorXd::Zero(p);
        out.analytic_mean_abs_eps = model.link.sigma() * std::sqrt(2.0 / M_PI);
    }
    return out;
}

double limit_objective(const LimitProblem& problem, const VectorXd& W, const VectorXd& u) {
    problem.validate();
    if (W.size() != u.size() || u.size() != problem.beta0.size())
        throw std::invalid_argument("dimension mismatch in limit objective");
    const double l0 = problem.lambda0;
    const double eabs = problem.moments.mean_abs_eps;
    const VectorXd& b0 = problem.beta0;
    double d = W.dot(u) - 0.5 * u.dot(problem.moments.M * u);
    switch (problem.penalty_case) {
        case PenaltyCase::LGammaGT1: {
            double pen = 0.0;
            for (int j = 0; j < u.size(); ++j)
                if (b0[j] != 0.0) pen += sgn(b0[j]) * abs_pow(b0[j], problem.gamma - 1.0) * u[j];
            d -= problem.gamma * l0 * eabs * pen;
            d += l0 * gamma_norm(b0, problem.gamma) * problem.moments.V.dot(u);
            break;
        }
        case PenaltyCase::Lasso: {
            double pen = 0.0;
            for (int j = 0; j < u.size(); ++j)
                pen += b0[j] != 0.0 ? sgn(b0[j]) * u[j] : std::fabs(u[j]);
            d -= l0 * eabs * pen;
            d += l0 * b0.lpNorm<1>() * problem.moments.V.dot(u);
            break;
        }
        case PenaltyCase::LGammaLT1: {
            double pen = 0.0;
            for (int j = 0; j < u.size(); ++j)
                if (b0[j] == 0.0) pen += abs_pow(u[j], problem.gamma);
            d -= l0 * eabs * pen;
            d += l0 * gamma_norm(b0, problem.gamma) * problem.moments.V.dot(u);
            break;
        }
        case PenaltyCase::Scad: {
            double pen = 0.0;
            for (int j = 0; j < u.size(); ++j)
                if (b0[j] == 0.0) pen += std::fabs(u[j]);
            d -= l0 * eabs * pen;
            break;
        }
    }
    return d;
}

namespace {

// Smooth linear coefficient c and per-coordinate soft-threshold weights mu
// such that D(u) = c'u - u'Mu/2 - sum_j mu_j |u_j| for the concave cases.
struct ConcaveForm {
    VectorXd c;
    VectorXd mu;
};

ConcaveForm concave_form(const LimitProblem& problem, const VectorXd& W) {
    const double l0 = problem.lambda0;
    const double eabs = problem.moments.mean_abs_eps;
    const VectorXd& b0 = problem.beta0;
    const int p = static_cast<int>(b0.size());
    ConcaveForm f;
    f.c = W;
    f.mu = VectorXd::Zero(p);
    switch (problem.penalty_case) {
        case PenaltyCase::LGammaGT1:
            for (int j = 0; j < p; ++j)
                if (b0[j] != 0.0)
                    f.c[j] -= problem.gamma * l0 * eabs * sgn(b0[j]) *
                              abs_pow(b0[j], problem.gamma - 1.0);
            f.c += l0 * gamma_norm(b0, problem.gamma) * problem.moments.V;
            break;
        case PenaltyCase::Lasso:
            for (int j = 0; j < p; ++j) {
                if (b0[j] != 0.0)
                    f.c[j] -= l0 * eabs * sgn(b0[j]);
                else
                    f.mu[j] = l0 * eabs;
            }
            f.c += l0 * b0.lpNorm<1>() * problem.moments.V;
            break;
        case PenaltyCase::Scad:
            for (int j = 0; j < p; ++j)
                if (b0[j] == 0.0) f.mu[j] = l0 * eabs;
            break;
        case PenaltyCase::LGammaLT1:
            throw std::logic_error("LGammaLT1 is not concave");
    }
    return f;
}

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

// Coordinate-wise proximal ascent for the concave cases; globally optimal
// when M is positive definite and the unconstrained maximizer lies in the
// ball.
VectorXd coordinate_prox_ascent(const MatrixXd& M, const ConcaveForm& f, int max_sweeps = 20000) {
    const int p = static_cast<int>(f.c.size());
    VectorXd u = VectorXd::Zero(p);
    VectorXd mu_u = VectorXd::Zero(p);  // M * u, maintained incrementally
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (int j = 0; j < p; ++j) {
            if (M(j, j) <= 0.0) throw std::invalid_argument("M has a nonpositive diagonal entry");
            const double r = f.c[j] - (mu_u[j] - M(j, j) * u[j]);
            const double next = soft_threshold(r, f.mu[j]) / M(j, j);
            const double change = std::fabs(next - u[j]);
            if (change > 0.0) {
                mu_u += (next - u[j]) * M.col(j);
                u[j] = next;
                max_change = std::max(max_change, change);
            }
        }
        if (max_change <= 1e-13) break;
    }
    return u;
}

// Projected-ascent fallback when the unconstrained concave maximizer lands
// outside the ball.
VectorXd ball_constrained_ascent(const LimitProblem& problem, const VectorXd& W,
                                 const VectorXd& start) {
    EstimatorOptions opts;
    opts.ball_radius_K = problem.radius_K;
    opts.restarts = 1;
    opts.max_iterations = 5000;
    opts.step_tolerance = 1e-12;
    opts.objective_tolerance = 1e-12;
    auto value = [&](const VectorXd& u) { return limit_objective(problem, W, u); };
    auto gradient = [&](const VectorXd& u) {
        const ConcaveForm f = concave_form(problem, W);
        VectorXd g = f.c - problem.moments.M * u;
        for (int j = 0; j < u.size(); ++j) g[j] -= f.mu[j] * sgn(u[j]);
        return g;
    };
    // Reuse the generic engine on the ball centered at the origin.
    const VectorXd center = VectorXd::Zero(start.size());
    const double norm = start.norm();
    VectorXd inside = norm > problem.radius_K ? (start * (problem.radius_K / norm)).eval() : start;
    EstimateResult r = maximize_in_ball(value, gradient, inside, problem.radius_K, opts);
    (void)center;
    return r.beta_hat;
}

// 1-d maximizer of r v - q v^2 / 2 - mu |v|^gamma on [-K, K], 0 < gamma < 1.
// Nonconvex; dense scan followed by golden-section refinement.
double lgamma_lt1_coordinate_max(double r, double q, double mu, double gamma, double K) {
    auto g = [&](double v) { return r * v - 0.5 * q * v * v - mu * abs_pow(v, gamma); };
    double best_v = 0.0;
    double best = 0.0;  // g(0) = 0
    const int grid = 800;
    for (int i = 1; i <= grid; ++i) {
        const double v = -K + 2.0 * K * static_cast<double>(i) / grid;
        const double gv = g(v);
        if (gv > best) {
            best = gv;
            best_v = v;
        }
    }
    if (best_v == 0.0) return 0.0;
    double lo = best_v - 2.0 * K / grid, hi = best_v + 2.0 * K / grid;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double g1 = g(x1), g2 = g(x2);
    for (int it = 0; it < 200; ++it) {
        if (g1 < g2) {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + phi * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - phi * (hi - lo);
            g1 = g(x1);
        }
    }
    const double v = 0.5 * (lo + hi);
    return g(v) > 0.0 ? v : 0.0;
}

VectorXd lgamma_lt1_argmax(const LimitProblem& problem, const VectorXd& W) {
    const int p = static_cast<int>(problem.beta0.size());
    const double l0 = problem.lambda0;
    const double eabs = problem.moments.mean_abs_eps;
    const MatrixXd& M = problem.moments.M;
    VectorXd c = W + l0 * gamma_norm(problem.beta0, problem.gamma) * problem.moments.V;
    VectorXd mu = VectorXd::Zero(p);
    for (int j = 0; j < p; ++j)
        if (problem.beta0[j] == 0.0) mu[j] = l0 * eabs;

    auto refine = [&](VectorXd u) {
        VectorXd mu_u = M * u;
        for (int sweep = 0; sweep < 2000; ++sweep) {
            double max_change = 0.0;
            for (int j = 0; j < p; ++j) {
                const double r = c[j] - (mu_u[j] - M(j, j) * u[j]);
                double next;
                if (mu[j] == 0.0)
                    next = r / M(j, j);
                else
                    next = lgamma_lt1_coordinate_max(r, M(j, j), mu[j], problem.gamma,
                                                     problem.radius_K);
                const double change = std::fabs(next - u[j]);
                if (change > 0.0) {
                    mu_u += (next - u[j]) * M.col(j);
                    u[j] = next;
                    max_change = std::max(max_change, change);
                }
            }
            if (max_change <= 1e-12) break;
        }
        return u;
    };

    // Multi-start: the penalty-free quadratic maximizer, every zero-coord
    // sign/off pattern applied to it, and the origin.
    Eigen::LDLT<MatrixXd> ldlt(M);
    VectorXd base = ldlt.solve(c);
    std::vector<int> zero_idx;
    for (int j = 0; j < p; ++j)
        if (problem.beta0[j] == 0.0) zero_idx.push_back(j);
    const int q = std::min<int>(static_cast<int>(zero_idx.size()), 12);
    std::vector<VectorXd> starts;
    starts.push_back(base);
    starts.push_back(VectorXd::Zero(p));
    for (int mask = 0; mask < (1 << q); ++mask) {
        VectorXd s = base;
        for (int b = 0; b < q; ++b)
            if (mask & (1 << b)) s[zero_idx[static_cast<std::size_t>(b)]] = 0.0;
        starts.push_back(std::move(s));
    }
    VectorXd best;
    double best_val = -std::numeric_limits<double>::infinity();
    for (auto& s : starts) {
        VectorXd u = refine(std::move(s));
        if (u.norm() > problem.radius_K) u = ball_constrained_ascent(problem, W, u);
        const double val = limit_objective(problem, W, u);
        // Ties broken toward the lexicographically smallest candidate.
        if (val > best_val + 1e-12 ||
            (std::fabs(val - best_val) <= 1e-12 && best.size() > 0 &&
             std::lexicographical_compare(u.begin(), u.end(), best.begin(), best.end()))) {
            best_val = val;
            best = std::move(u);
        }
    }
    return best;
}

}  // namespace

AsymptoticDraw limit_argmax(const LimitProblem& problem, const VectorXd& W) {
    problem.validate();
    if (W.size() != problem.beta0.size())
        throw std::invalid_argument("W dimension does not match problem");
    VectorXd u;
    if (problem.penalty_case == PenaltyCase::LGammaLT1) {
        u = lgamma_lt1_argmax(problem, W);
    } else {
        const ConcaveForm f = concave_form(problem, W);
        u = coordinate_prox_ascent(problem.moments.M, f);
        if (u.norm() > problem.radius_K) u = ball_constrained_ascent(problem, W, u);
    }
    AsymptoticDraw d;
    d.W = W;
    d.u_star = u;
    d.d_value = limit_objective(problem, W, u);
    return d;
}

VectorXd sample_limit_gaussian(const MatrixXd& M, Rng& rng) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(M);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("eigendecomposition of M failed");
    const VectorXd scale = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    VectorXd z(M.rows());
    for (int j = 0; j < M.rows(); ++j) z[j] = rng.normal();
    return eig.eigenvectors() * scale.cwiseProduct(z);
}

std::vector<AsymptoticDraw> draw_limit_samples(const LimitProblem& problem, int count,
                                               std::uint64_t seed) {
    Rng rng(mix_seed(seed, {0x11317d7ULL}));
    std::vector<AsymptoticDraw> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        out.push_back(limit_argmax(problem, sample_limit_gaussian(problem.moments.M, rng)));
    return out;
}

VectorXd oracle_limit(const LimitProblem& problem, const VectorXd& W,
                      const std::vector<bool>& sparsity_pattern) {
    problem.validate();
    const int p = static_cast<int>(problem.beta0.size());
    if (static_cast<int>(sparsity_pattern.size()) != p || W.size() != p)
        throw std::invalid_argument("dimension mismatch in oracle_limit");
    std::vector<int> support;
    for (int j = 0; j < p; ++j)
        if (!sparsity_pattern[static_cast<std::size_t>(j)]) support.push_back(j);
    const int s = static_cast<int>(support.size());
    VectorXd out = VectorXd::Zero(p);
    if (s == 0) return out;
    MatrixXd m11(s, s);
    VectorXd rhs(s);
    for (int a = 0; a < s; ++a) {
        for (int b = 0; b < s; ++b) m11(a, b) = problem.moments.M(support[a], support[b]);
        rhs[a] = W[support[a]];
    }
    if (problem.penalty_case != PenaltyCase::Scad) {
        const double scale = problem.lambda0 * gamma_norm(problem.beta0, problem.gamma);
        for (int a = 0; a < s; ++a) rhs[a] += scale * problem.moments.V[support[a]];
    }
    Eigen::FullPivLU<MatrixXd> lu(m11);
    if (!lu.isInvertible()) throw RankDeficiencyError("M11 block is singular");
    const VectorXd sol = lu.solve(rhs);
    for (int a = 0; a < s; ++a) out[support[a]] = sol[a];
    return out;
}

RateCheck check_rates(const PenaltySpec& penalty_template,
                      const std::function<double(double)>& lambda_schedule, const VectorXd& beta0,
                      const std::vector<double>& n_grid) {
    if (n_grid.size() < 4) throw std::invalid_argument("n_grid needs >= 4 points");
    if (n_grid.back() < 100.0 * n_grid.front())
        throw std::invalid_argument("n_grid should span at least two decades");
    const int p = static_cast<int>(beta0.size());
    RateCheck out;
    std::vector<double> ns, alphas, taus;
    for (double n : n_grid) {
        const double rn = 1.0 / std::sqrt(n);
        const PenaltySpec spec = penalty_template.with_lambda(lambda_schedule(n));
        double alpha = 0.0;
        for (int j = 0; j < p; ++j)
            if (beta0[j] != 0.0) alpha = std::max(alpha, std::fabs(penalty_derivative(spec, beta0[j])));
        // Canonical probe u = (+-1, ..., +-1); the penalty is even so the
        // two sign patterns coincide.
        alpha = std::max(alpha, static_cast<double>(p) * penalty_value(spec, rn) / rn);
        double tau = 0.0;
        for (int j = 0; j < p; ++j) tau = std::max(tau, penalty_value(spec, beta0[j]));
        out.alpha_sequence.emplace_back(n, alpha);
        out.tau_sequence.emplace_back(n, tau);
        ns.push_back(n);
        alphas.push_back(alpha);
        taus.push_back(tau);
    }
    const bool alpha_zero = std::all_of(alphas.begin(), alphas.end(), [](double v) { return v == 0.0; });
    const bool tau_zero = std::all_of(taus.begin(), taus.end(), [](double v) { return v == 0.0; });
    out.alpha_slope = alpha_zero ? -std::numeric_limits<double>::infinity()
                                 : log_log_slope(ns, alphas);
    out.tau_slope = tau_zero ? -std::numeric_limits<double>::infinity() : log_log_slope(ns, taus);
    out.pass = out.alpha_slope <= -0.45 && out.tau_slope <= -0.45;
    return out;
}

SignConditionTable probe_sign_conditions(const ModelSpec& model, double C,
                                         const std::vector<double>& n_grid, long mc_samples,
                                         std::uint64_t seed, int directions) {
    model.validate();
    if (!(C > 0.0)) throw std::invalid_argument("C must be > 0");
    const int p = model.p();
    Rng rng(mix_seed(seed, {0x51675c0ULL}));

    // Common random numbers: one shared sample reused for every n and
    // direction so the decay in n is smooth.
    MatrixXd xs(mc_samples, p);
    VectorXd eps(mc_samples);
    for (long s = 0; s < mc_samples; ++s) {
        const VectorXd x = model.covariates.sample(rng);
        xs.row(s) = x.transpose();
        const double theta = x.dot(model.beta0);
        double y;
        if (model.link.family() == Family::LinearGaussian)
            y = theta + model.link.sigma() * rng.normal();
        else
            y = rng.bernoulli(model.link.b1(theta)) ? 1.0 : 0.0;
        eps[s] = y - model.link.b1(theta);
    }

    // Deterministic direction set on the sphere ||u|| = C.
    Rng dir_rng(mix_seed(seed, {0xd12ec71ULL}));
    std::vector<VectorXd> dirs;
    for (int d = 0; d < directions; ++d) {
        VectorXd u(p);
        double norm;
        do {
            for (int j = 0; j < p; ++j) u[j] = dir_rng.normal();
            norm = u.norm();
        } while (norm == 0.0);
        dirs.push_back(u * (C / norm));
    }

    const std::size_t nn = n_grid.size();
    std::vector<double> eq8(nn, 0.0), eq9(nn, 0.0);
    std::vector<double> rn(nn);
    for (std::size_t k = 0; k < nn; ++k) rn[k] = 1.0 / std::sqrt(n_grid[k]);

    for (const VectorXd& u : dirs) {
        const VectorXd t = xs * u;
        std::vector<double> s8(nn, 0.0), s9(nn, 0.0);
        for (long s = 0; s < mc_samples; ++s) {
            const double e = eps[s], ts = t[s];
            for (std::size_t k = 0; k < nn; ++k) {
                const double bound = rn[k] * ts;
                double ind = 0.0;
                if (e >= 0.0 && e <= bound)
                    ind = 1.0;
                else if (e <= 0.0 && e >= bound)
                    ind = -1.0;
                if (ind != 0.0) {
                    s8[k] += e * ind;
                    s9[k] += ts * ind;
                }
            }
        }
        for (std::size_t k = 0; k < nn; ++k) {
            eq8[k] = std::max(eq8[k], std::fabs(s8[k]) / static_cast<double>(mc_samples));
            eq9[k] = std::max(eq9[k], std::fabs(s9[k]) / static_cast<double>(mc_samples));
        }
    }

    SignConditionTable out;
    for (std::size_t k = 0; k < nn; ++k) out.rows.push_back({n_grid[k], eq8[k], eq9[k]});
    const bool pos8 = std::all_of(eq8.begin(), eq8.end(), [](double v) { return v > 0.0; });
    const bool pos9 = std::all_of(eq9.begin(), eq9.end(), [](double v) { return v > 0.0; });
    std::vector<double> ns(n_grid.begin(), n_grid.end());
    out.near_zero_slope = pos8 ? log_log_slope(ns, eq8) : -std::numeric_limits<double>::infinity();
    out.sign_slope = pos9 ? log_log_slope(ns, eq9) : -std::numeric_limits<double>::infinity();
    return out;
}

TailCheck validate_tail(const ModelSpec& model, int moment_order, long mc_samples,
                        std::uint64_t seed) {
    model.validate();
    if (moment_order != 1 && moment_order != 2)
        throw std::invalid_argument("moment_order must be 1 or 2");
    if (mc_samples < 2) throw std::invalid_argument("mc_samples must be >= 2");
    Rng rng(mix_seed(seed, {0x7a11ULL}));
    TailCheck out;
    double sum = 0.0, sum2 = 0.0;
    long drawn = 0;
    for (int stage = 0; stage < 4; ++stage) {
        const long target = mc_samples << stage;
        for (; drawn < target; ++drawn) {
            const VectorXd x = model.covariates.sample(rng);
            const double norm = x.norm();
            const double nk = moment_order == 1 ? norm : norm * norm;
            const double v = nk * (1.0 + std::exp(std::fabs(x.dot(model.beta0))));
            sum += v;
            sum2 += v * v;
        }
        out.stage_estimates.push_back(sum / static_cast<double>(drawn));
    }
    const double m = static_cast<double>(drawn);
    out.estimate = sum / m;
    out.standard_error = std::sqrt(std::max(sum2 / m - out.estimate * out.estimate, 0.0) / m);
    const auto [lo, hi] =
        std::minmax_element(out.stage_estimates.begin(), out.stage_estimates.end());
    const double med = median(out.stage_estimates);
    out.stable = std::isfinite(out.estimate) && med > 0.0 && (*hi - *lo) < 0.2 * med;
    return out;
}

}  // namespace fgsmglm
