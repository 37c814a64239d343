#include "fgsmglm/estimators.hpp"

#include <cmath>
#include <limits>

#include "fgsmglm/rng.hpp"

namespace fgsmglm {

void EstimatorOptions::validate() const {
    if (!(ball_radius_K > 0.0)) throw std::invalid_argument("ball_radius_K must be > 0");
    if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
    if (!(step_tolerance > 0.0) || !(objective_tolerance > 0.0))
        throw std::invalid_argument("tolerances must be > 0");
}

double zero_threshold(const VectorXd& reference_beta) {
    return 1e-6 * (1.0 + reference_beta.cwiseAbs().maxCoeff());
}

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kShrink = 0.5;
constexpr double kInitialStep = 1.0;

VectorXd project_ball(const VectorXd& v, const VectorXd& center, double radius) {
    const VectorXd d = v - center;
    const double norm = d.norm();
    if (norm <= radius) return v;
    return center + d * (radius / norm);
}

VectorXd uniform_ball_point(Rng& rng, const VectorXd& center, double radius) {
    const int p = static_cast<int>(center.size());
    VectorXd dir(p);
    double norm;
    do {
        for (int j = 0; j < p; ++j) dir[j] = rng.normal();
        norm = dir.norm();
    } while (norm == 0.0);
    const double r = radius * std::pow(rng.uniform_open(), 1.0 / p);
    return center + dir * (r / norm);
}

double checked_value(const std::function<double(const VectorXd&)>& value, const VectorXd& beta) {
    const double v = value(beta);
    if (!std::isfinite(v))
        throw NonFiniteObjectiveError("objective became non-finite during search", beta);
    return v;
}

struct RunResult {
    VectorXd beta;
    double value;
    bool converged;
    int iterations;
};

RunResult ascent_loop(const std::function<double(const VectorXd&)>& value,
                      const std::function<VectorXd(const VectorXd&)>& gradient, VectorXd beta,
                      const VectorXd& center, double radius, const EstimatorOptions& opts) {
    double fval = checked_value(value, beta);
    double step = kInitialStep;
    bool converged = false;
    int iter = 0;
    for (; iter < opts.max_iterations; ++iter) {
        const VectorXd grad = gradient(beta);
        if (!grad.allFinite())
            throw NonFiniteObjectiveError("gradient became non-finite during search", beta);
        if (grad.norm() <= 1e-14 * (1.0 + std::fabs(fval))) {
            converged = true;
            break;
        }
        // Backtracking line search on the projected step; the accepted step
        // warm-starts the next iteration.
        double s = step;
        bool accepted = false;
        VectorXd cand;
        double fcand = 0.0;
        while (s >= 1e-18) {
            cand = project_ball(beta + s * grad, center, radius);
            const double move = grad.dot(cand - beta);
            if (move > 0.0) {
                fcand = checked_value(value, cand);
                if (fcand >= fval + kArmijo * move) {
                    accepted = true;
                    break;
                }
            }
            s *= kShrink;
        }
        if (!accepted) {
            // No improving step exists down to underflow: stationary up to
            // floating point, possibly at a nonsmooth kink or the boundary.
            converged = true;
            break;
        }
        const double delta_f = fcand - fval;
        const double delta_b = (cand - beta).norm();
        beta = std::move(cand);
        fval = fcand;
        step = std::min(s * 4.0, 1e6);
        if (delta_b <= opts.step_tolerance * (1.0 + beta.norm()) &&
            delta_f <= opts.objective_tolerance * (1.0 + std::fabs(fval))) {
            converged = true;
            ++iter;
            break;
        }
    }

    return {std::move(beta), fval, converged, iter};
}

// Hard-threshold polish: snap coordinates to exact zero when the objective
// does not decrease by more than objective_tolerance and the ball constraint
// still holds. Returns the updated objective value.
double polish_zeros(const std::function<double(const VectorXd&)>& value, VectorXd& beta,
                    double fval, const VectorXd& center, double radius,
                    const EstimatorOptions& opts) {
    for (int j = 0; j < beta.size(); ++j) {
        if (beta[j] == 0.0) continue;
        VectorXd cand = beta;
        cand[j] = 0.0;
        if ((cand - center).norm() > radius + 1e-12) continue;
        const double fcand = checked_value(value, cand);
        if (fcand >= fval - opts.objective_tolerance) {
            beta = std::move(cand);
            fval = fcand;
        }
    }
    return fval;
}

RunResult ascend(const std::function<double(const VectorXd&)>& value,
                 const std::function<VectorXd(const VectorXd&)>& gradient, VectorXd beta,
                 const VectorXd& center, double radius, const EstimatorOptions& opts) {
    RunResult run = ascent_loop(value, gradient, std::move(beta), center, radius, opts);
    run.value = polish_zeros(value, run.beta, run.value, center, radius, opts);

    // Refit the free coordinates after snapping: the shared backtracking step
    // can stall smooth coordinates while chattering at a kink, so re-ascend
    // with the gradient masked on the zeroed set, then re-polish.
    for (int round = 0; round < 3; ++round) {
        const int p = static_cast<int>(run.beta.size());
        std::vector<char> fixed(static_cast<std::size_t>(p));
        int n_fixed = 0;
        for (int j = 0; j < p; ++j) {
            fixed[static_cast<std::size_t>(j)] = run.beta[j] == 0.0;
            n_fixed += fixed[static_cast<std::size_t>(j)] ? 1 : 0;
        }
        if (n_fixed == 0 || n_fixed == p) break;
        auto masked_gradient = [&gradient, fixed](const VectorXd& b) {
            VectorXd g = gradient(b);
            for (int j = 0; j < g.size(); ++j)
                if (fixed[static_cast<std::size_t>(j)]) g[j] = 0.0;
            return g;
        };
        RunResult refit = ascent_loop(value, masked_gradient, run.beta, center, radius, opts);
        refit.value = polish_zeros(value, refit.beta, refit.value, center, radius, opts);
        refit.iterations += run.iterations;
        const bool improved =
            refit.value > run.value + opts.objective_tolerance * (1.0 + std::fabs(run.value));
        if (refit.value >= run.value) run = std::move(refit);
        if (!improved) break;
    }
    return run;
}

EstimateResult run_restarts(const std::function<double(const VectorXd&)>& value,
                            const std::function<VectorXd(const VectorXd&)>& gradient,
                            const VectorXd& center, double radius, const EstimatorOptions& opts) {
    opts.validate();
    EstimateResult best;
    bool have_best = false;
    for (int r = 0; r < opts.restarts; ++r) {
        VectorXd start = center;
        if (r > 0) {
            Rng rng(mix_seed(opts.seed, {0x5e57a27ULL, static_cast<std::uint64_t>(r)}));
            start = uniform_ball_point(rng, center, radius);
        }
        RunResult run = ascend(value, gradient, std::move(start), center, radius, opts);
        if (!have_best || run.value > best.objective_value) {
            best.beta_hat = std::move(run.beta);
            best.objective_value = run.value;
            best.converged = run.converged;
            best.iterations_used = run.iterations;
            best.restart_index = r;
            have_best = true;
        }
    }
    const double thresh = zero_threshold(center);
    best.active_set.resize(static_cast<std::size_t>(best.beta_hat.size()));
    for (int j = 0; j < best.beta_hat.size(); ++j)
        best.active_set[static_cast<std::size_t>(j)] = std::fabs(best.beta_hat[j]) <= thresh;
    return best;
}

}  // namespace

EstimateResult maximize_in_ball(const std::function<double(const VectorXd&)>& value,
                                const std::function<VectorXd(const VectorXd&)>& gradient,
                                const VectorXd& center, double radius,
                                const EstimatorOptions& opts) {
    return run_restarts(value, gradient, center, radius, opts);
}

EstimateResult fit_fgsm(const AdversarialObjective& obj, const VectorXd& beta0,
                        const EstimatorOptions& opts) {
    const double radius = opts.ball_radius_K / std::sqrt(static_cast<double>(obj.dataset().n()));
    return run_restarts([&obj](const VectorXd& b) { return obj.objective(b); },
                        [&obj](const VectorXd& b) { return obj.subgradient(b); }, beta0, radius,
                        opts);
}

EstimateResult fit_penalized_likelihood(const Dataset& dataset, const LinkFamily& link,
                                        const PenaltySpec& penalty, const VectorXd& beta0,
                                        const EstimatorOptions& opts) {
    const double n = static_cast<double>(dataset.n());
    const double radius = opts.ball_radius_K / std::sqrt(n);
    auto value = [&](const VectorXd& b) { return loglik(dataset, b, link) - n * penalty_value(penalty, b); };
    auto gradient = [&](const VectorXd& b) {
        VectorXd g = dataset.x.transpose() * residuals(dataset, b, link);
        for (int j = 0; j < b.size(); ++j) g[j] -= n * penalty_derivative(penalty, b[j]);
        return g;
    };
    return run_restarts(value, gradient, beta0, radius, opts);
}

EstimateResult fit_mle(const Dataset& dataset, const LinkFamily& link) {
    const int p = dataset.p();
    EstimateResult result;
    if (link.family() == Family::LinearGaussian) {
        Eigen::ColPivHouseholderQR<MatrixXd> qr(dataset.x);
        if (qr.rank() < p) throw RankDeficiencyError("design matrix is rank deficient");
        result.beta_hat = qr.solve(dataset.y);
        result.converged = true;
        result.iterations_used = 1;
    } else {
        VectorXd beta = VectorXd::Zero(p);
        double f = loglik(dataset, beta, link);
        const int max_newton = 100;
        bool done = false;
        int iter = 0;
        for (; iter < max_newton; ++iter) {
            VectorXd theta = dataset.x * beta;
            VectorXd e(dataset.n());
            VectorXd w(dataset.n());
            for (int i = 0; i < dataset.n(); ++i) {
                e[i] = dataset.y[i] - link.b1(theta[i]);
                w[i] = link.b2(theta[i]);
            }
            VectorXd grad = dataset.x.transpose() * e;
            if (grad.norm() <= 1e-8) {
                done = true;
                break;
            }
            MatrixXd hess = dataset.x.transpose() * w.asDiagonal() * dataset.x;
            Eigen::LDLT<MatrixXd> ldlt(hess);
            if (ldlt.info() != Eigen::Success)
                throw RankDeficiencyError("singular information matrix in logistic scoring");
            VectorXd dir = ldlt.solve(grad);
            double t = 1.0;
            bool stepped = false;
            while (t >= 1e-12) {
                VectorXd cand = beta + t * dir;
                const double fc = loglik(dataset, cand, link);
                if (std::isfinite(fc) && fc >= f - 1e-14 * (1.0 + std::fabs(f))) {
                    beta = std::move(cand);
                    f = fc;
                    stepped = true;
                    break;
                }
                t *= 0.5;
            }
            if (!stepped)
                throw ConvergenceError("logistic scoring stalled (data may be separable)");
        }
        if (!done) throw ConvergenceError("logistic scoring did not reach gradient tolerance");
        result.beta_hat = beta;
        result.converged = true;
        result.iterations_used = iter;
    }
    result.objective_value = loglik(dataset, result.beta_hat, link);
    result.restart_index = 0;
    const double thresh = zero_threshold(result.beta_hat);
    result.active_set.resize(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j)
        result.active_set[static_cast<std::size_t>(j)] = std::fabs(result.beta_hat[j]) <= thresh;
    return result;
}

}  // namespace fgsmglm
