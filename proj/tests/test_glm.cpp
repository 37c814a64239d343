#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "fgsmglm/glm.hpp"

using namespace fgsmglm;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> vals) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
    int i = 0;
    for (double x : vals) v[i++] = x;
    return v;
}

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
    Eigen::MatrixXd m(2, 2);
    m << a, b, c, d;
    return m;
}

}  // namespace

TEST_CASE("link function exact values") {
    auto lg = LinkFamily::linear_gaussian(1.0);
    CHECK(lg.b(3.0) == 4.5);
    CHECK(lg.b1(3.0) == 3.0);
    CHECK(lg.b2(3.0) == 1.0);
    CHECK(lg.b3(3.0) == 0.0);

    auto logit = LinkFamily::logistic();
    CHECK(logit.b(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(logit.b1(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    for (double t : {-700.0, -50.0, 0.0, 50.0, 700.0}) {
        CHECK(std::isfinite(logit.b(t)));
        CHECK(logit.b2(t) >= 0.0);
        CHECK(logit.b2(t) <= 0.25);
    }
}

TEST_CASE("finite-difference derivative chain for all links") {
    const double h = 1e-5;
    for (const auto& link : {LinkFamily::linear_gaussian(2.0), LinkFamily::logistic()}) {
        for (double t = -20.0; t <= 20.0; t += 0.5) {
            const double d1 = (link.b(t + h) - link.b(t - h)) / (2 * h);
            CHECK(std::fabs(d1 - link.b1(t)) <= 1e-6 * (1.0 + std::fabs(link.b1(t))));
            const double d2 = (link.b1(t + h) - link.b1(t - h)) / (2 * h);
            CHECK(std::fabs(d2 - link.b2(t)) <= 1e-6 * (1.0 + std::fabs(link.b2(t))));
            const double d3 = (link.b2(t + h) - link.b2(t - h)) / (2 * h);
            CHECK(std::fabs(d3 - link.b3(t)) <= 1e-6 * (1.0 + std::fabs(link.b3(t))));
        }
    }
}

TEST_CASE("linear_predictor") {
    Dataset d;
    d.x = mat2(1, 0, 0, 1);
    d.y = vec({0, 0});
    auto lp = linear_predictor(d, vec({3, -2}));
    CHECK(lp[0] == 3.0);
    CHECK(lp[1] == -2.0);

    Dataset single;
    single.x.resize(1, 2);
    single.x << 2.0, 0.5;
    single.y = vec({0});
    CHECK(linear_predictor(single, vec({1, 4}))[0] == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(linear_predictor(single, vec({0, 0}))[0] == 0.0);

    CHECK_THROWS_AS(linear_predictor(d, vec({1, 2, 3})), std::invalid_argument);
}

TEST_CASE("residuals") {
    Dataset d;
    d.x.resize(1, 1);
    d.x << 1.0;
    d.y = vec({1});
    CHECK(residuals(d, vec({1}), LinkFamily::linear_gaussian(1.0))[0] == 0.0);

    d.x << 0.0;
    CHECK(residuals(d, vec({7}), LinkFamily::logistic())[0] == doctest::Approx(0.5).epsilon(1e-15));

    d.x << 1.0;
    d.y = vec({0});
    const double expected = -std::exp(1.0) / (1.0 + std::exp(1.0));
    CHECK(residuals(d, vec({1}), LinkFamily::logistic())[0] ==
          doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("loglik") {
    Dataset d;
    d.x.resize(1, 1);
    d.x << 0.0;
    d.y = vec({1});
    CHECK(loglik(d, vec({5}), LinkFamily::logistic()) ==
          doctest::Approx(-std::log(2.0)).epsilon(1e-15));

    d.x << 1.0;
    d.y = vec({2});
    CHECK(loglik(d, vec({2}), LinkFamily::linear_gaussian(1.0)) ==
          doctest::Approx(2.0).epsilon(1e-15));

    Dataset empty;
    empty.x.resize(0, 1);
    empty.y.resize(0);
    CHECK(loglik(empty, vec({1}), LinkFamily::logistic()) == 0.0);
}

TEST_CASE("sample_dataset sanity and determinism") {
    const int n = 10000;
    ModelSpec lin{LinkFamily::linear_gaussian(1.0), vec({1.0, -0.5}),
                  CovariateDistribution::gaussian_iid(vec({0, 0}), mat2(1, 0, 0, 1))};
    Dataset d = sample_dataset(lin, n, 42);
    const Eigen::VectorXd res = residuals(d, lin.beta0, lin.link);
    CHECK(std::fabs(res.mean()) <= 4.0 / std::sqrt(static_cast<double>(n)));

    ModelSpec logit{LinkFamily::logistic(), vec({0.0, 0.0}), lin.covariates};
    Dataset dl = sample_dataset(logit, n, 7);
    CHECK(std::fabs(dl.y.mean() - 0.5) <= 4.0 * 0.5 / std::sqrt(static_cast<double>(n)));
    for (int i = 0; i < dl.n(); ++i) CHECK((dl.y[i] == 0.0 || dl.y[i] == 1.0));

    Dataset d2 = sample_dataset(lin, n, 42);
    CHECK(d.x == d2.x);
    CHECK(d.y == d2.y);
}

TEST_CASE("residual moments match E b''(x'b0) at scale") {
    const int n = 100000;
    ModelSpec logit{LinkFamily::logistic(), vec({0.8, -0.3}),
                    CovariateDistribution::gaussian_iid(vec({0, 0}), mat2(1, 0, 0, 1))};
    Dataset d = sample_dataset(logit, n, 99);
    const Eigen::VectorXd eps = residuals(d, logit.beta0, logit.link);
    double second = eps.squaredNorm() / n;
    double expected = 0.0;
    for (int i = 0; i < n; ++i) expected += logit.link.b2(d.x.row(i).dot(logit.beta0));
    expected /= n;
    CHECK(std::fabs(second - expected) / expected <= 0.05);
    CHECK(std::fabs(eps.mean()) <= 0.01);
}

TEST_CASE("covariate distributions") {
    CHECK_THROWS_AS(CovariateDistribution::gaussian_iid(vec({0, 0}), mat2(1, 2, 2, 1)),
                    std::invalid_argument);  // not positive definite
    auto box = CovariateDistribution::uniform_box(vec({-1, 0}), vec({1, 2}));
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        auto x = box.sample(rng);
        CHECK(x[0] >= -1.0);
        CHECK(x[0] <= 1.0);
        CHECK(x[1] >= 0.0);
        CHECK(x[1] <= 2.0);
    }
    auto shifted = CovariateDistribution::shifted(box, vec({10, 10}));
    auto x = shifted.sample(rng);
    CHECK(x[0] >= 9.0);
    CHECK(x[1] >= 10.0);
}

TEST_CASE("dataset CSV round trip and metadata") {
    ModelSpec lin{LinkFamily::linear_gaussian(1.0), vec({1.0, -0.5}),
                  CovariateDistribution::gaussian_iid(vec({0, 0}), mat2(1, 0, 0, 1))};
    Dataset d = sample_dataset(lin, 37, 123);
    const std::string path = std::filesystem::temp_directory_path() / "fgsmglm_test_data.csv";
    write_dataset_csv(d, path);
    Dataset back = read_dataset_csv(path);
    CHECK(back.n() == d.n());
    CHECK(back.p() == d.p());
    CHECK((back.x - d.x).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.y - d.y).cwiseAbs().maxCoeff() == 0.0);

    const std::string meta = dataset_metadata_json(d);
    CHECK(meta.find("\"seed\":123") != std::string::npos);
    CHECK(meta.find("linear_gaussian") != std::string::npos);
    std::filesystem::remove(path);
}
