#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "fgsmglm/adversarial.hpp"

namespace fgsmglm {

struct EstimatorOptions {
    double ball_radius_K = 10.0;
    int restarts = 8;
    int max_iterations = 500;
    double step_tolerance = 1e-10;
    double objective_tolerance = 1e-9;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EstimateResult {
    VectorXd beta_hat;
    double objective_value = 0.0;
    bool converged = false;
    int iterations_used = 0;
    std::vector<bool> active_set;  // true when the coordinate is treated as exactly 0
    int restart_index = 0;
};

/// Thrown when the objective turns non-finite during the search.
class NonFiniteObjectiveError : public std::runtime_error {
public:
    NonFiniteObjectiveError(std::string what, VectorXd beta)
        : std::runtime_error(std::move(what)), offending_beta(std::move(beta)) {}
    VectorXd offending_beta;
};

class RankDeficiencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

double zero_threshold(const VectorXd& reference_beta);

/// Local maximizer of Q_n over the ball ||beta - beta0|| <= K/sqrt(n):
/// multi-restart projected ascent with backtracking line search and a
/// hard-threshold polish that snaps coordinates to exact zero when the
/// objective permits.
EstimateResult fit_fgsm(const AdversarialObjective& obj, const VectorXd& beta0,
                        const EstimatorOptions& opts);

/// Same search applied to the penalized likelihood
/// Q~_n(beta) = sum_i [y_i x_i'beta - b(x_i'beta)] - n p(beta).
EstimateResult fit_penalized_likelihood(const Dataset& dataset, const LinkFamily& link,
                                        const PenaltySpec& penalty, const VectorXd& beta0,
                                        const EstimatorOptions& opts);

/// Unpenalized reference: exact least squares for LinearGaussian,
/// Newton scoring to gradient norm <= 1e-8 for Logistic.
EstimateResult fit_mle(const Dataset& dataset, const LinkFamily& link);

/// Generic engine behind fit_fgsm and fit_penalized_likelihood; exposed for
/// tests that drive it with bespoke objectives.
EstimateResult maximize_in_ball(const std::function<double(const VectorXd&)>& value,
                                const std::function<VectorXd(const VectorXd&)>& gradient,
                                const VectorXd& center, double radius,
                                const EstimatorOptions& opts);

}  // namespace fgsmglm
