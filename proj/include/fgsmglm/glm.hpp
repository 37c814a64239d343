#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "fgsmglm/rng.hpp"

namespace fgsmglm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Family { LinearGaussian, Logistic };

/// Canonical-link cumulant function b with derivatives b', b'', b'''.
/// For LinearGaussian, b(t) = t^2/2 regardless of sigma; sigma only drives
/// the sampler and moment computations.
class LinkFamily {
public:
    LinkFamily() : LinkFamily(Family::LinearGaussian, 1.0) {}

    static LinkFamily linear_gaussian(double sigma);
    static LinkFamily logistic();

    Family family() const { return family_; }
    double sigma() const { return sigma_; }

    double b(double t) const;
    double b1(double t) const;
    double b2(double t) const;
    double b3(double t) const;

    std::string family_name() const;

private:
    LinkFamily(Family f, double sigma) : family_(f), sigma_(sigma) {}
    Family family_;
    double sigma_;
};

enum class CovariateKind { GaussianIid, UniformBox, Shifted, HeavyTailGaussian };

/// Covariate sampling law. Shifted wraps another distribution and adds a
/// fixed offset (used to build non-sign-neutral designs).
/// HeavyTailGaussian draws a standard Gaussian vector divided by a single
/// Uniform(0,1) variate, giving polynomial tails.
class CovariateDistribution {
public:
    CovariateDistribution() = default;

    static CovariateDistribution gaussian_iid(VectorXd mean, MatrixXd covariance);
    static CovariateDistribution uniform_box(VectorXd lower, VectorXd upper);
    static CovariateDistribution shifted(CovariateDistribution base, VectorXd shift);
    static CovariateDistribution heavy_tail_gaussian(int dim);

    int dim() const { return dim_; }
    CovariateKind kind() const { return kind_; }
    VectorXd sample(Rng& rng) const;

    const VectorXd& mean() const { return mean_; }
    const MatrixXd& covariance() const { return cov_; }
    const VectorXd& lower() const { return lower_; }
    const VectorXd& upper() const { return upper_; }
    const VectorXd& shift() const { return shift_; }
    const CovariateDistribution& base() const { return *base_; }

private:
    CovariateKind kind_ = CovariateKind::GaussianIid;
    int dim_ = 0;
    VectorXd mean_, lower_, upper_, shift_;
    MatrixXd cov_, chol_;  // chol_ = lower Cholesky factor of cov_
    std::shared_ptr<const CovariateDistribution> base_;
};

struct ModelSpec {
    LinkFamily link;
    VectorXd beta0;
    CovariateDistribution covariates;

    int p() const { return static_cast<int>(beta0.size()); }
    void validate() const;
};

struct Dataset {
    MatrixXd x;
    VectorXd y;
    std::uint64_t seed = 0;
    std::optional<ModelSpec> model_provenance;

    int n() const { return static_cast<int>(x.rows()); }
    int p() const { return static_cast<int>(x.cols()); }
};

VectorXd linear_predictor(const Dataset& dataset, const VectorXd& beta);
VectorXd residuals(const Dataset& dataset, const VectorXd& beta, const LinkFamily& link);
double loglik(const Dataset& dataset, const VectorXd& beta, const LinkFamily& link);
Dataset sample_dataset(const ModelSpec& model, int n, std::uint64_t seed);

/// CSV persistence: header x1,...,xp,y; 17 significant digits.
void write_dataset_csv(const Dataset& dataset, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

/// Companion metadata JSON with keys seed, n, p, family, beta0.
std::string dataset_metadata_json(const Dataset& dataset);

}  // namespace fgsmglm
