#include "fgsmglm/adversarial.hpp"

#include <cmath>
#include <stdexcept>

namespace fgsmglm {

namespace {
double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }
}  // namespace

AdversarialObjective::AdversarialObjective(Dataset dataset, LinkFamily link, PenaltySpec penalty)
    : dataset_(std::move(dataset)), link_(link), penalty_(std::move(penalty)) {
    if (dataset_.x.rows() != dataset_.y.size())
        throw std::invalid_argument("dataset x/y row counts differ");
    penalty_.validate();
}

void AdversarialObjective::check_beta(const VectorXd& beta) const {
    if (beta.size() != dataset_.p())
        throw std::invalid_argument("beta dimension does not match dataset");
    if (!beta.allFinite()) throw std::invalid_argument("beta must be finite");
}

double AdversarialObjective::objective(const VectorXd& beta) const {
    check_beta(beta);
    const double pv = penalty_value(penalty_, beta);
    const int n = dataset_.n();
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double theta = dataset_.x.row(i).dot(beta);
        const double s = sgn(dataset_.y[i] - link_.b1(theta));
        total += dataset_.y[i] * theta - dataset_.y[i] * s * pv - link_.b(theta - s * pv);
    }
    return total;
}

PerturbedDataset AdversarialObjective::perturb(const VectorXd& beta) const {
    check_beta(beta);
    const VectorXd m = perturbation_magnitudes(penalty_, beta);
    PerturbedDataset out;
    out.base = dataset_;
    out.beta_used = beta;
    out.x_tilde = dataset_.x;
    for (int i = 0; i < dataset_.n(); ++i) {
        const double theta = dataset_.x.row(i).dot(beta);
        const double s = sgn(dataset_.y[i] - link_.b1(theta));
        if (s != 0.0) out.x_tilde.row(i) -= s * m.transpose();
    }
    return out;
}

VectorXd AdversarialObjective::subgradient(const VectorXd& beta) const {
    check_beta(beta);
    const double pv = penalty_value(penalty_, beta);
    const int p = dataset_.p();
    VectorXd deriv(p);
    for (int j = 0; j < p; ++j) deriv[j] = penalty_derivative(penalty_, beta[j]);

    // d/dbeta_j = sum_i e~_i (x_ij - s_i deriv_j), with s_i = sign(e_i)
    // frozen and e~_i = y_i - b'(x_i'beta - s_i p(beta)).
    VectorXd grad = VectorXd::Zero(p);
    double signed_resid_sum = 0.0;
    for (int i = 0; i < dataset_.n(); ++i) {
        const double theta = dataset_.x.row(i).dot(beta);
        const double s = sgn(dataset_.y[i] - link_.b1(theta));
        const double et = dataset_.y[i] - link_.b1(theta - s * pv);
        grad += et * dataset_.x.row(i).transpose();
        signed_resid_sum += s * et;
    }
    grad -= signed_resid_sum * deriv;
    return grad;
}

}  // namespace fgsmglm
