#include "fgsmglm/penalty.hpp"

#include <cmath>
#include <stdexcept>

namespace fgsmglm {

PenaltySpec PenaltySpec::lgamma(double gamma, double lambda) {
    PenaltySpec s;
    s.family = PenaltyFamily::LGamma;
    s.gamma = gamma;
    s.lambda = lambda;
    s.validate();
    return s;
}

PenaltySpec PenaltySpec::lasso(double lambda) {
    PenaltySpec s;
    s.family = PenaltyFamily::Lasso;
    s.gamma = 1.0;
    s.lambda = lambda;
    s.validate();
    return s;
}

PenaltySpec PenaltySpec::scad(double lambda, double a) {
    PenaltySpec s;
    s.family = PenaltyFamily::Scad;
    s.lambda = lambda;
    s.a = a;
    s.validate();
    return s;
}

PenaltySpec PenaltySpec::with_lambda(double new_lambda) const {
    PenaltySpec s = *this;
    s.lambda = new_lambda;
    s.validate();
    return s;
}

std::string PenaltySpec::family_name() const {
    switch (family) {
        case PenaltyFamily::LGamma: return "lgamma";
        case PenaltyFamily::Lasso: return "lasso";
        case PenaltyFamily::Scad: return "scad";
    }
    return "?";
}

void PenaltySpec::validate() const {
    if (!(lambda >= 0.0)) throw std::invalid_argument("penalty lambda must be >= 0");
    if (family == PenaltyFamily::LGamma && !(gamma > 0.0))
        throw std::invalid_argument("LGamma requires gamma > 0");
    if (family == PenaltyFamily::Scad && !(a > 2.0))
        throw std::invalid_argument("SCAD requires a > 2");
}

namespace {

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// |theta|^gamma with the gamma = 1 path exact, so that LGamma(1) and Lasso
// coincide to machine precision.
double abs_pow(double theta, double gamma) {
    const double t = std::fabs(theta);
    if (gamma == 1.0) return t;
    if (gamma == 2.0) return t * t;
    return std::pow(t, gamma);
}

}  // namespace

double penalty_value(const PenaltySpec& spec, double theta) {
    const double t = std::fabs(theta);
    switch (spec.family) {
        case PenaltyFamily::Lasso:
            return spec.lambda * t;
        case PenaltyFamily::LGamma:
            return spec.lambda * abs_pow(theta, spec.gamma);
        case PenaltyFamily::Scad: {
            const double l = spec.lambda, a = spec.a;
            if (t <= l) return l * t;
            if (t <= a * l) return -(t * t - 2.0 * a * l * t + l * l) / (2.0 * (a - 1.0));
            return (a + 1.0) * l * l / 2.0;
        }
    }
    return 0.0;
}

double penalty_value(const PenaltySpec& spec, const VectorXd& theta) {
    double total = 0.0;
    for (int j = 0; j < theta.size(); ++j) total += penalty_value(spec, theta[j]);
    return total;
}

double penalty_derivative(const PenaltySpec& spec, double theta) {
    const double s = sgn(theta);
    if (s == 0.0) return 0.0;
    const double t = std::fabs(theta);
    switch (spec.family) {
        case PenaltyFamily::Lasso:
            return spec.lambda * s;
        case PenaltyFamily::LGamma:
            if (spec.gamma == 1.0) return spec.lambda * s;
            return spec.lambda * spec.gamma * abs_pow(theta, spec.gamma - 1.0) * s;
        case PenaltyFamily::Scad: {
            const double l = spec.lambda, a = spec.a;
            if (l == 0.0) return 0.0;
            if (t <= l) return l * s;
            const double clipped = std::max(a * l - t, 0.0);
            return s * clipped / (a - 1.0);
        }
    }
    return 0.0;
}

VectorXd perturbation_magnitudes(const PenaltySpec& spec, const VectorXd& beta) {
    VectorXd m(beta.size());
    for (int j = 0; j < beta.size(); ++j)
        m[j] = beta[j] == 0.0 ? 0.0 : penalty_value(spec, beta[j]) / beta[j];
    return m;
}

}  // namespace fgsmglm
