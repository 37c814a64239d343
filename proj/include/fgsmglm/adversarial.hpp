#pragma once

#include "fgsmglm/glm.hpp"
#include "fgsmglm/penalty.hpp"

namespace fgsmglm {

struct PerturbedDataset {
    MatrixXd x_tilde;
    Dataset base;
    VectorXd beta_used;
};

/// The adversarially perturbed GLM objective
///   Q_n(beta) = sum_i [y_i x_i'beta - y_i sign(e_i) p(beta) - b(x_i'beta - sign(e_i) p(beta))]
/// with e_i = y_i - b'(x_i'beta) recomputed at the evaluated beta and
/// p(beta) the vector-summed penalty value.
class AdversarialObjective {
public:
    AdversarialObjective(Dataset dataset, LinkFamily link, PenaltySpec penalty);

    double objective(const VectorXd& beta) const;

    /// x_tilde_i = x_i - sign(e_i) * perturbation_magnitudes(penalty, beta)'.
    PerturbedDataset perturb(const VectorXd& beta) const;

    /// Gradient of Q_n holding each sign(e_i) fixed at its current value and
    /// using penalty_derivative componentwise; the sign(0) = 0 selection at
    /// nondifferentiable points.
    VectorXd subgradient(const VectorXd& beta) const;

    const Dataset& dataset() const { return dataset_; }
    const LinkFamily& link() const { return link_; }
    const PenaltySpec& penalty() const { return penalty_; }

private:
    void check_beta(const VectorXd& beta) const;

    Dataset dataset_;
    LinkFamily link_;
    PenaltySpec penalty_;
};

}  // namespace fgsmglm
