#include "fgsmglm/glm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fgsmglm {

LinkFamily LinkFamily::linear_gaussian(double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("LinearGaussian requires sigma > 0");
    return LinkFamily(Family::LinearGaussian, sigma);
}

LinkFamily LinkFamily::logistic() { return LinkFamily(Family::Logistic, 0.0); }

namespace {

// Overflow-safe sigmoid.
double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

}  // namespace

double LinkFamily::b(double t) const {
    if (family_ == Family::LinearGaussian) return 0.5 * t * t;
    return t <= 0.0 ? std::log1p(std::exp(t)) : t + std::log1p(std::exp(-t));
}

double LinkFamily::b1(double t) const {
    if (family_ == Family::LinearGaussian) return t;
    return sigmoid(t);
}

double LinkFamily::b2(double t) const {
    if (family_ == Family::LinearGaussian) return 1.0;
    const double p = sigmoid(t);
    return p * (1.0 - p);
}

double LinkFamily::b3(double t) const {
    if (family_ == Family::LinearGaussian) return 0.0;
    const double p = sigmoid(t);
    return p * (1.0 - p) * (1.0 - 2.0 * p);
}

std::string LinkFamily::family_name() const {
    return family_ == Family::LinearGaussian ? "linear_gaussian" : "logistic";
}

CovariateDistribution CovariateDistribution::gaussian_iid(VectorXd mean, MatrixXd covariance) {
    const auto p = mean.size();
    if (covariance.rows() != p || covariance.cols() != p)
        throw std::invalid_argument("covariance dimensions do not match mean");
    if (!covariance.isApprox(covariance.transpose(), 1e-12))
        throw std::invalid_argument("covariance must be symmetric");
    Eigen::LLT<MatrixXd> llt(covariance);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("covariance must be positive definite");
    CovariateDistribution d;
    d.kind_ = CovariateKind::GaussianIid;
    d.dim_ = static_cast<int>(p);
    d.mean_ = std::move(mean);
    d.cov_ = std::move(covariance);
    d.chol_ = llt.matrixL();
    return d;
}

CovariateDistribution CovariateDistribution::uniform_box(VectorXd lower, VectorXd upper) {
    if (lower.size() != upper.size())
        throw std::invalid_argument("uniform box bounds must have equal length");
    if ((upper.array() < lower.array()).any())
        throw std::invalid_argument("uniform box requires lower <= upper");
    CovariateDistribution d;
    d.kind_ = CovariateKind::UniformBox;
    d.dim_ = static_cast<int>(lower.size());
    d.lower_ = std::move(lower);
    d.upper_ = std::move(upper);
    return d;
}

CovariateDistribution CovariateDistribution::shifted(CovariateDistribution base, VectorXd shift) {
    if (base.dim() != shift.size())
        throw std::invalid_argument("shift dimension does not match base distribution");
    CovariateDistribution d;
    d.kind_ = CovariateKind::Shifted;
    d.dim_ = base.dim();
    d.shift_ = std::move(shift);
    d.base_ = std::make_shared<const CovariateDistribution>(std::move(base));
    return d;
}

CovariateDistribution CovariateDistribution::heavy_tail_gaussian(int dim) {
    if (dim < 1) throw std::invalid_argument("dimension must be >= 1");
    CovariateDistribution d;
    d.kind_ = CovariateKind::HeavyTailGaussian;
    d.dim_ = dim;
    return d;
}

VectorXd CovariateDistribution::sample(Rng& rng) const {
    switch (kind_) {
        case CovariateKind::GaussianIid: {
            VectorXd z(dim_);
            for (int j = 0; j < dim_; ++j) z[j] = rng.normal();
            return mean_ + chol_ * z;
        }
        case CovariateKind::UniformBox: {
            VectorXd x(dim_);
            for (int j = 0; j < dim_; ++j) x[j] = rng.uniform(lower_[j], upper_[j]);
            return x;
        }
        case CovariateKind::Shifted:
            return base_->sample(rng) + shift_;
        case CovariateKind::HeavyTailGaussian: {
            VectorXd z(dim_);
            for (int j = 0; j < dim_; ++j) z[j] = rng.normal();
            return z / rng.uniform_open();
        }
    }
    throw std::logic_error("unreachable covariate kind");
}

void ModelSpec::validate() const {
    if (beta0.size() < 1) throw std::invalid_argument("beta0 must have dimension >= 1");
    if (!beta0.allFinite()) throw std::invalid_argument("beta0 must be finite");
    if (covariates.dim() != beta0.size())
        throw std::invalid_argument("covariate dimension does not match beta0");
}

VectorXd linear_predictor(const Dataset& dataset, const VectorXd& beta) {
    if (beta.size() != dataset.p())
        throw std::invalid_argument("beta dimension does not match dataset");
    return dataset.x * beta;
}

VectorXd residuals(const Dataset& dataset, const VectorXd& beta, const LinkFamily& link) {
    VectorXd theta = linear_predictor(dataset, beta);
    VectorXd e(dataset.n());
    for (int i = 0; i < dataset.n(); ++i) e[i] = dataset.y[i] - link.b1(theta[i]);
    return e;
}

double loglik(const Dataset& dataset, const VectorXd& beta, const LinkFamily& link) {
    if (beta.size() != dataset.p())
        throw std::invalid_argument("beta dimension does not match dataset");
    double total = 0.0;
    for (int i = 0; i < dataset.n(); ++i) {
        const double theta = dataset.x.row(i).dot(beta);
        total += dataset.y[i] * theta - link.b(theta);
    }
    return total;
}

Dataset sample_dataset(const ModelSpec& model, int n, std::uint64_t seed) {
    model.validate();
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    const int p = model.p();
    Dataset d;
    d.x.resize(n, p);
    d.y.resize(n);
    d.seed = seed;
    d.model_provenance = model;
    Rng rng(mix_seed(seed, {0xda7a5e7ULL}));
    for (int i = 0; i < n; ++i) {
        VectorXd xi = model.covariates.sample(rng);
        d.x.row(i) = xi.transpose();
        const double theta = xi.dot(model.beta0);
        if (model.link.family() == Family::LinearGaussian) {
            d.y[i] = theta + model.link.sigma() * rng.normal();
        } else {
            d.y[i] = rng.bernoulli(model.link.b1(theta)) ? 1.0 : 0.0;
        }
    }
    return d;
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_dataset_csv(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (int j = 1; j <= dataset.p(); ++j) out << "x" << j << ",";
    out << "y\n";
    for (int i = 0; i < dataset.n(); ++i) {
        for (int j = 0; j < dataset.p(); ++j) out << fmt17(dataset.x(i, j)) << ",";
        out << fmt17(dataset.y[i]) << "\n";
    }
}

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty dataset file: " + path);
    int p = 0;
    for (char c : line)
        if (c == ',') ++p;  // p covariate columns plus y
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (static_cast<int>(row.size()) != p + 1)
            throw std::runtime_error("malformed dataset row in " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("dataset has no observations: " + path);
    Dataset d;
    d.x.resize(static_cast<int>(rows.size()), p);
    d.y.resize(static_cast<int>(rows.size()));
    for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
        for (int j = 0; j < p; ++j) d.x(i, j) = rows[i][j];
        d.y[i] = rows[i][p];
    }
    return d;
}

std::string dataset_metadata_json(const Dataset& dataset) {
    nlohmann::json j;
    j["seed"] = dataset.seed;
    j["n"] = dataset.n();
    j["p"] = dataset.p();
    if (dataset.model_provenance) {
        j["family"] = dataset.model_provenance->link.family_name();
        j["beta0"] = std::vector<double>(dataset.model_provenance->beta0.begin(),
                                         dataset.model_provenance->beta0.end());
    }
    return j.dump();
}

}  // namespace fgsmglm
