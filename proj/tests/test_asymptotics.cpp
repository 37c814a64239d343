#include <doctest.h>

#include <cmath>

#include "fgsmglm/asymptotics.hpp"
#include "fgsmglm/rng.hpp"

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

// Minimal hand-filled problem: M, V, E|eps| set directly.
LimitProblem hand_problem(PenaltyCase pc, double gamma) {
    LimitProblem pr;
    pr.moments.M = mat2(1, 0, 0, 1);
    pr.moments.V = vec({0.1, -0.2});
    pr.moments.mean_abs_eps = 0.8;
    pr.penalty_case = pc;
    pr.gamma = gamma;
    pr.lambda0 = 0.5;
    pr.beta0 = vec({1.0, 0.0});
    pr.radius_K = 10.0;
    return pr;
}

double sgn(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace

TEST_CASE("penalty_case_for maps families and gamma correctly") {
    CHECK(penalty_case_for(PenaltySpec::lasso(0.1)) == PenaltyCase::Lasso);
    CHECK(penalty_case_for(PenaltySpec::lgamma(1.0, 0.1)) == PenaltyCase::Lasso);
    CHECK(penalty_case_for(PenaltySpec::lgamma(2.0, 0.1)) == PenaltyCase::LGammaGT1);
    CHECK(penalty_case_for(PenaltySpec::lgamma(0.5, 0.1)) == PenaltyCase::LGammaLT1);
    CHECK(penalty_case_for(PenaltySpec::scad(0.1)) == PenaltyCase::Scad);
}

TEST_CASE("moments for a linear Gaussian model with iid covariates") {
    ModelSpec model{LinkFamily::linear_gaussian(1.0), vec({1.0, -0.5}),
                    CovariateDistribution::gaussian_iid(vec({0, 0}), mat2(1, 0, 0, 1))};
    MomentSummary m = compute_moments(model, 200000, 21);
    // M = E x x' = I, V = 0 by sign symmetry, E|eps| = sqrt(2/pi).
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            CHECK(std::fabs(m.M(a, b) - (a == b ? 1.0 : 0.0)) <= 3.0 * m.se_M(a, b) + 1e-12);
    for (int j = 0; j < 2; ++j) CHECK(std::fabs(m.V[j]) <= 3.0 * m.se_V[j]);
    const double expect = std::sqrt(2.0 / M_PI);
    CHECK(std::fabs(m.mean_abs_eps - expect) <= 3.0 * m.se_mean_abs_eps);
    REQUIRE(m.analytic_V.has_value());
    CHECK(m.analytic_V->isZero());
    REQUIRE(m.analytic_mean_abs_eps.has_value());
    CHECK(*m.analytic_mean_abs_eps == doctest::Approx(expect).epsilon(1e-12));

    // Determinism.
    MomentSummary m2 = compute_moments(model, 200000, 21);
    CHECK(m.M == m2.M);
    CHECK(m.mean_abs_eps == m2.mean_abs_eps);
}

TEST_CASE("shifted logistic design produces a significantly nonzero V") {
    auto base = CovariateDistribution::gaussian_iid(vec({0, 0}), mat2(1, 0, 0, 1));
    ModelSpec model{LinkFamily::logistic(), vec({1.0, 0.5}),
                    CovariateDistribution::shifted(base, vec({1.0, 1.0}))};
    MomentSummary m = compute_moments(model, 200000, 33);
    CHECK(m.V.norm() > 5.0 * m.se_V.norm());
    CHECK_FALSE(m.analytic_V.has_value());
}

TEST_CASE("limit objective hand examples across the four cases") {
    const Eigen::VectorXd W = vec({1.0, 2.0});
    const Eigen::VectorXd u = vec({0.5, -1.0});
    // Common parts: W'u = -1.5, u'Mu/2 = 0.625, V'u = 0.25, lambda0 = 0.5,
    // E|eps| = 0.8, beta0 = (1, 0).
    CHECK(limit_objective(hand_problem(PenaltyCase::Lasso, 1.0), W, u) ==
          doctest::Approx(-2.6).epsilon(1e-14));
    CHECK(limit_objective(hand_problem(PenaltyCase::Scad, 1.0), W, u) ==
          doctest::Approx(-2.525).epsilon(1e-14));
    CHECK(limit_objective(hand_problem(PenaltyCase::LGammaGT1, 2.0), W, u) ==
          doctest::Approx(-2.4).epsilon(1e-14));
    CHECK(limit_objective(hand_problem(PenaltyCase::LGammaLT1, 0.5), W, u) ==
          doctest::Approx(-2.4).epsilon(1e-14));

    // lambda0 = 0 collapses every case to the pure quadratic form.
    for (auto pc : {PenaltyCase::Lasso, PenaltyCase::Scad}) {
        LimitProblem pr = hand_problem(pc, 1.0);
        pr.lambda0 = 0.0;
        CHECK(limit_objective(pr, W, u) == doctest::Approx(-2.125).epsilon(1e-14));
    }
    CHECK_THROWS_AS(limit_objective(hand_problem(PenaltyCase::Lasso, 1.0), W, vec({1.0})),
                    std::invalid_argument);
}

TEST_CASE("limit argmax: closed forms for the smooth cases") {
    LimitProblem pr = hand_problem(PenaltyCase::Scad, 1.0);
    pr.moments.M = mat2(2.0, 0.3, 0.3, 1.0);
    pr.beta0 = vec({1.0, -0.7});  // all nonzero: SCAD case is a pure quadratic
    const Eigen::VectorXd W = vec({0.4, -0.9});
    AsymptoticDraw d = limit_argmax(pr, W);
    const Eigen::VectorXd expect = pr.moments.M.ldlt().solve(W);
    CHECK((d.u_star - expect).norm() <= 1e-9);
    CHECK(d.d_value == doctest::Approx(limit_objective(pr, W, expect)).epsilon(1e-12));

    // lambda0 = 0: every case reduces to M^{-1} W.
    for (auto pc : {PenaltyCase::Lasso, PenaltyCase::LGammaGT1, PenaltyCase::LGammaLT1}) {
        LimitProblem pz = hand_problem(pc, pc == PenaltyCase::LGammaGT1 ? 2.0 : 0.5);
        if (pc == PenaltyCase::Lasso) pz.gamma = 1.0;
        pz.moments.M = mat2(2.0, 0.3, 0.3, 1.0);
        pz.lambda0 = 0.0;
        AsymptoticDraw dz = limit_argmax(pz, W);
        const Eigen::VectorXd ez = pz.moments.M.ldlt().solve(W);
        CHECK((dz.u_star - ez).norm() <= 1e-8);
    }

    // LGammaGT1 is smooth everywhere: u* = M^{-1} c with the shifted linear
    // coefficient c = W - gamma l0 E|eps| sign(b0)|b0|^{gamma-1} + l0 ||b0||_g^g V.
    LimitProblem pg = hand_problem(PenaltyCase::LGammaGT1, 2.0);
    pg.beta0 = vec({1.0, -0.7});
    const double norm_g = 1.0 + 0.49;
    Eigen::VectorXd c = W;
    c[0] -= 2.0 * 0.5 * 0.8 * 1.0;
    c[1] -= 2.0 * 0.5 * 0.8 * (-0.7);
    c += 0.5 * norm_g * pg.moments.V;
    AsymptoticDraw dg = limit_argmax(pg, W);
    CHECK((dg.u_star - Eigen::VectorXd(pg.moments.M.ldlt().solve(c))).norm() <= 1e-9);
}

TEST_CASE("limit argmax: lasso with diagonal M matches soft thresholding") {
    LimitProblem pr = hand_problem(PenaltyCase::Lasso, 1.0);
    pr.moments.M = mat2(2.0, 0.0, 0.0, 0.5);
    const Eigen::VectorXd W = vec({0.9, 0.3});
    // Coordinate 1 (beta0 = 1): u1 = (W1 - l0 E|eps| + l0 ||b0||_1 V1) / M11.
    // Coordinate 2 (beta0 = 0): u2 = soft(W2 + l0 ||b0||_1 V2, l0 E|eps|) / M22.
    const double c1 = 0.9 - 0.5 * 0.8 + 0.5 * 1.0 * 0.1;
    const double z2 = 0.3 + 0.5 * 1.0 * (-0.2);
    const double t = 0.5 * 0.8;
    const double u2 = (z2 > t ? z2 - t : (z2 < -t ? z2 + t : 0.0)) / 0.5;
    AsymptoticDraw d = limit_argmax(pr, W);
    CHECK(d.u_star[0] == doctest::Approx(c1 / 2.0).epsilon(1e-10));
    CHECK(d.u_star[1] == doctest::Approx(u2).epsilon(1e-10));
    CHECK(u2 == 0.0);  // |z2| = 0.2 < 0.4: thresholded to exact zero

    // A W2 beyond the threshold moves u2 off zero.
    AsymptoticDraw d2 = limit_argmax(pr, vec({0.9, 1.0}));
    CHECK(d2.u_star[1] == doctest::Approx((1.0 - 0.1 - 0.4) / 0.5).epsilon(1e-10));
}

TEST_CASE("limit argmax beats a dense grid for lasso and the nonconvex case") {
    for (auto pc : {PenaltyCase::Lasso, PenaltyCase::LGammaLT1}) {
        LimitProblem pr = hand_problem(pc, pc == PenaltyCase::Lasso ? 1.0 : 0.5);
        pr.moments.M = mat2(1.5, 0.4, 0.4, 0.8);
        pr.radius_K = 6.0;
        const Eigen::VectorXd W = vec({0.7, -0.5});
        AsymptoticDraw d = limit_argmax(pr, W);
        CHECK(d.u_star.norm() <= pr.radius_K + 1e-9);
        const int grid = 401;
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < grid; ++a) {
            for (int b = 0; b < grid; ++b) {
                Eigen::VectorXd u(2);
                u[0] = -3.0 + 6.0 * a / (grid - 1);
                u[1] = -3.0 + 6.0 * b / (grid - 1);
                best = std::max(best, limit_objective(pr, W, u));
            }
        }
        CHECK(d.d_value >= best - 1e-6);
    }
}

TEST_CASE("stationarity of the concave argmax") {
    LimitProblem pr = hand_problem(PenaltyCase::Lasso, 1.0);
    pr.moments.M = mat2(1.5, 0.4, 0.4, 0.8);
    Rng rng(55);
    for (int t = 0; t < 20; ++t) {
        const Eigen::VectorXd W = vec({rng.normal(), rng.normal()});
        AsymptoticDraw d = limit_argmax(pr, W);
        // Reconstruct c and mu of D(u) = c'u - u'Mu/2 - sum mu_j |u_j|.
        Eigen::VectorXd c = W + pr.lambda0 * pr.beta0.lpNorm<1>() * pr.moments.V;
        Eigen::VectorXd mu = vec({0.0, 0.0});
        c[0] -= pr.lambda0 * pr.moments.mean_abs_eps * sgn(pr.beta0[0]);
        mu[1] = pr.lambda0 * pr.moments.mean_abs_eps;
        const Eigen::VectorXd g = c - pr.moments.M * d.u_star;
        for (int j = 0; j < 2; ++j) {
            if (d.u_star[j] != 0.0)
                CHECK(std::fabs(g[j] - mu[j] * sgn(d.u_star[j])) <= 1e-8);
            else
                CHECK(std::fabs(g[j]) <= mu[j] + 1e-8);
        }
    }
}

TEST_CASE("sample_limit_gaussian covariance matches M") {
    const Eigen::MatrixXd M = mat2(1.0, 0.5, 0.5, 2.0);
    Rng rng(77);
    const int n = 20000;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(2, 2);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd w = sample_limit_gaussian(M, rng);
        acc += w * w.transpose();
        mean += w;
    }
    acc /= n;
    mean /= n;
    CHECK(mean.norm() <= 0.05);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) CHECK(std::fabs(acc(a, b) - M(a, b)) <= 0.08);
}

TEST_CASE("draw_limit_samples is deterministic and carries consistent values") {
    LimitProblem pr = hand_problem(PenaltyCase::Lasso, 1.0);
    auto draws = draw_limit_samples(pr, 50, 19);
    auto again = draw_limit_samples(pr, 50, 19);
    REQUIRE(draws.size() == 50);
    for (std::size_t i = 0; i < draws.size(); ++i) {
        CHECK(draws[i].u_star == again[i].u_star);
        CHECK(draws[i].d_value ==
              doctest::Approx(limit_objective(pr, draws[i].W, draws[i].u_star)).epsilon(1e-12));
    }
}

TEST_CASE("oracle limit hand examples") {
    LimitProblem pr = hand_problem(PenaltyCase::Lasso, 1.0);
    const Eigen::VectorXd W = vec({1.0, 2.0});
    // Full support with M = I: W + lambda0 ||b0||_1 V = (1.05, 1.9).
    Eigen::VectorXd full = oracle_limit(pr, W, {false, false});
    CHECK(full[0] == doctest::Approx(1.05).epsilon(1e-12));
    CHECK(full[1] == doctest::Approx(1.9).epsilon(1e-12));
    // Zero pattern on the second coordinate embeds a zero there.
    Eigen::VectorXd part = oracle_limit(pr, W, {false, true});
    CHECK(part[0] == doctest::Approx(1.05).epsilon(1e-12));
    CHECK(part[1] == 0.0);
    // SCAD drops the V correction.
    LimitProblem ps = hand_problem(PenaltyCase::Scad, 1.0);
    Eigen::VectorXd scad = oracle_limit(ps, W, {false, true});
    CHECK(scad[0] == doctest::Approx(1.0).epsilon(1e-12));
    // Non-identity M11 block.
    pr.moments.M = mat2(2.0, 0.0, 0.0, 1.0);
    CHECK(oracle_limit(pr, W, {false, true})[0] == doctest::Approx(0.525).epsilon(1e-12));
    // Empty support.
    CHECK(oracle_limit(pr, W, {true, true}).isZero());
    CHECK_THROWS_AS(oracle_limit(pr, W, {true}), std::invalid_argument);
}

TEST_CASE("rate checker on canonical schedules") {
    const Eigen::VectorXd beta0 = vec({1.0, -0.5, 0.0});
    const std::vector<double> grid = {100, 1000, 10000, 100000};

    RateCheck ok = check_rates(PenaltySpec::lasso(1.0), [](double n) { return 1.0 / std::sqrt(n); },
                               beta0, grid);
    CHECK(ok.pass);
    CHECK(ok.alpha_slope == doctest::Approx(-0.5).epsilon(1e-6));
    CHECK(ok.tau_slope == doctest::Approx(-0.5).epsilon(1e-6));

    RateCheck bad = check_rates(PenaltySpec::lasso(1.0), [](double) { return 0.3; }, beta0, grid);
    CHECK_FALSE(bad.pass);
    CHECK(std::fabs(bad.alpha_slope) <= 1e-9);

    RateCheck half = check_rates(PenaltySpec::lgamma(0.5, 1.0),
                                 [](double n) { return std::pow(n, -0.75); }, beta0, grid);
    CHECK(half.pass);
    CHECK(half.alpha_slope <= -0.45);
    CHECK(half.tau_slope == doctest::Approx(-0.75).epsilon(1e-6));

    RateCheck scad = check_rates(PenaltySpec::scad(1.0), [](double n) { return 1.0 / std::sqrt(n); },
                                 beta0, grid);
    CHECK(scad.pass);

    CHECK_THROWS_AS(check_rates(PenaltySpec::lasso(1.0), [](double) { return 0.1; }, beta0,
                                {100, 200, 300, 400}),
                    std::invalid_argument);
}

TEST_CASE("sign-condition probes decay for a smooth design and vanish for a degenerate one") {
    ModelSpec model{LinkFamily::linear_gaussian(1.0), vec({1.0, -0.5}),
                    CovariateDistribution::gaussian_iid(vec({0, 0}), mat2(1, 0, 0, 1))};
    const std::vector<double> grid = {100, 1000, 10000};
    SignConditionTable t = probe_sign_conditions(model, 1.0, grid, 100000, 5);
    REQUIRE(t.rows.size() == 3);
    for (std::size_t k = 0; k + 1 < t.rows.size(); ++k) {
        CHECK(t.rows[k].eq_near_zero_sup > t.rows[k + 1].eq_near_zero_sup);
        CHECK(t.rows[k].eq_sign_sup > t.rows[k + 1].eq_sign_sup);
    }
    CHECK(t.near_zero_slope <= -0.8);
    CHECK(t.sign_slope <= -0.4);

    // x identically zero: both suprema vanish for every n.
    ModelSpec degenerate{LinkFamily::linear_gaussian(1.0), vec({0.5}),
                         CovariateDistribution::uniform_box(vec({0.0}), vec({0.0}))};
    SignConditionTable z = probe_sign_conditions(degenerate, 1.0, grid, 2000, 6);
    for (const auto& row : z.rows) {
        CHECK(row.eq_near_zero_sup == 0.0);
        CHECK(row.eq_sign_sup == 0.0);
    }
}

TEST_CASE("tail validator: light tails stable, heavy tails not") {
    ModelSpec light{LinkFamily::linear_gaussian(1.0), vec({1.0, -0.5}),
                    CovariateDistribution::gaussian_iid(vec({0, 0}), mat2(1, 0, 0, 1))};
    for (int order : {1, 2}) {
        TailCheck t = validate_tail(light, order, 20000, 9);
        CHECK(t.stable);
        CHECK(t.stage_estimates.size() == 4);
        CHECK(std::isfinite(t.estimate));
        CHECK(t.estimate > 0.0);
    }

    ModelSpec heavy{LinkFamily::linear_gaussian(1.0), vec({1.0, -0.5}),
                    CovariateDistribution::heavy_tail_gaussian(2)};
    TailCheck h = validate_tail(heavy, 2, 20000, 9);
    CHECK_FALSE(h.stable);

    CHECK_THROWS_AS(validate_tail(light, 3, 1000, 1), std::invalid_argument);
}
