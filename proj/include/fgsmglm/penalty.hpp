#pragma once

#include <Eigen/Dense>

#include <string>

namespace fgsmglm {

using Eigen::VectorXd;

enum class PenaltyFamily { LGamma, Lasso, Scad };

/// Penalty family p_lambda with multiplier lambda and shape parameters.
/// Vector penalties are componentwise sums: p(beta) = sum_j p(beta_j).
struct PenaltySpec {
    PenaltyFamily family = PenaltyFamily::Lasso;
    double lambda = 0.0;
    double gamma = 1.0;  // LGamma only
    double a = 3.7;      // Scad only

    static PenaltySpec lgamma(double gamma, double lambda);
    static PenaltySpec lasso(double lambda);
    static PenaltySpec scad(double lambda, double a = 3.7);

    PenaltySpec with_lambda(double new_lambda) const;
    std::string family_name() const;
    void validate() const;
};

double penalty_value(const PenaltySpec& spec, double theta);
double penalty_value(const PenaltySpec& spec, const VectorXd& theta);

/// Componentwise derivative of the vector-summed penalty, with the
/// sign(0) = 0 convention making it total.
double penalty_derivative(const PenaltySpec& spec, double theta);

/// Component j is p(beta_j)/beta_j, or 0 when beta_j = 0. These are the
/// per-coordinate perturbation steps of the adversarial covariate schema.
VectorXd perturbation_magnitudes(const PenaltySpec& spec, const VectorXd& beta);

}  // namespace fgsmglm
