#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "fgsmglm/glm.hpp"
#include "fgsmglm/penalty.hpp"

namespace fgsmglm {

/// Monte Carlo estimates of the population quantities entering the limit
/// objective: M = E b''(x'b0) x x', V = E[b''(x'b0) sign(eps) x], E|eps|.
struct MomentSummary {
    MatrixXd M;
    VectorXd V;
    double mean_abs_eps = 0.0;
    long mc_samples = 0;
    MatrixXd se_M;
    VectorXd se_V;
    double se_mean_abs_eps = 0.0;
    // LinearGaussian closed forms, reported alongside the MC values.
    std::optional<VectorXd> analytic_V;
    std::optional<double> analytic_mean_abs_eps;
};

enum class PenaltyCase { LGammaGT1, Lasso, LGammaLT1, Scad };

struct LimitProblem {
    MomentSummary moments;
    PenaltyCase penalty_case = PenaltyCase::Lasso;
    double gamma = 1.0;  // LGamma cases
    double lambda0 = 0.0;
    VectorXd beta0;
    double radius_K = 10.0;

    void validate() const;
};

struct AsymptoticDraw {
    VectorXd W;
    VectorXd u_star;
    double d_value = 0.0;
};

struct RateCheck {
    std::vector<std::pair<double, double>> alpha_sequence;  // (n, alpha_n)
    std::vector<std::pair<double, double>> tau_sequence;    // (n, tau_n)
    double alpha_slope = 0.0;
    double tau_slope = 0.0;
    bool pass = false;
};

struct SignConditionRow {
    double n = 0.0;
    double eq_near_zero_sup = 0.0;  // sup over directions of |E eps (1{...} - 1{...})|
    double eq_sign_sup = 0.0;       // sup over directions of |E x'u (1{...} - 1{...})|
};

struct SignConditionTable {
    std::vector<SignConditionRow> rows;
    double near_zero_slope = 0.0;
    double sign_slope = 0.0;
};

struct TailCheck {
    double estimate = 0.0;
    double standard_error = 0.0;
    bool stable = false;
    std::vector<double> stage_estimates;  // at mc_samples, 2x, 4x, 8x
};

PenaltyCase penalty_case_for(const PenaltySpec& spec);

MomentSummary compute_moments(const ModelSpec& model, long mc_samples, std::uint64_t seed);

/// The Theorem-2 style limit objective D(u) for the given penalty case.
double limit_objective(const LimitProblem& problem, const VectorXd& W, const VectorXd& u);

/// Argmax of D over ||u|| <= K. Concave cases use coordinate-wise proximal
/// ascent; the nonconvex 0 < gamma < 1 case uses multi-start local search.
AsymptoticDraw limit_argmax(const LimitProblem& problem, const VectorXd& W);

/// One draw W ~ N(0, M) via symmetric eigenfactorization of the estimated M.
VectorXd sample_limit_gaussian(const MatrixXd& M, Rng& rng);

std::vector<AsymptoticDraw> draw_limit_samples(const LimitProblem& problem, int count,
                                               std::uint64_t seed);

/// The sparse-support limit vector, embedded with zeros at the pattern
/// positions; pattern marks the true zero components.
VectorXd oracle_limit(const LimitProblem& problem, const VectorXd& W,
                      const std::vector<bool>& sparsity_pattern);

/// Evaluates alpha_n and tau_n on a grid of n and fits log-log slopes;
/// passes when both decay at least like 1/sqrt(n) (slope <= -0.45).
RateCheck check_rates(const PenaltySpec& penalty_template,
                      const std::function<double(double)>& lambda_schedule, const VectorXd& beta0,
                      const std::vector<double>& n_grid);

SignConditionTable probe_sign_conditions(const ModelSpec& model, double C,
                                         const std::vector<double>& n_grid, long mc_samples,
                                         std::uint64_t seed, int directions = 64);

/// Monte Carlo estimate of E[||x||^k (1 + e^{|x'b0|})] with a doubling-size
/// stability heuristic as the finiteness signal.
TailCheck validate_tail(const ModelSpec& model, int moment_order, long mc_samples,
                        std::uint64_t seed);

}  // namespace fgsmglm
