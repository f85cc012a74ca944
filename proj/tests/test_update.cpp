#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "pnmf/majorize.hpp"
#include "pnmf/update.hpp"

using namespace pnmf;
using namespace pnmf::testing;

namespace {

constexpr double kEps = 1e-8;

SyntheticView tiny_view(double b0) {
    Matrix A(1, 2);
    A << 1, 1;
    Vector b(1);
    b << b0;
    return make_green_view(A, b);
}

// Zero function registered as relatively smooth with constant sigma: a valid
// (loose) certificate that isolates the sigma_R terms of the coefficients.
void add_zero_relsmooth(SubproblemView& view, double sigma, Index dim) {
    view.has_relsmooth = true;
    view.sigma_R = sigma;
    view.sR_value = [](const Vector&) { return 0.0; };
    view.sR_grad = [dim](const Vector&) { return Vector(Vector::Zero(dim)); };
    view.grad_sR = Vector::Zero(dim);
}

}  // namespace

TEST_CASE("mu_coefficients on the basic example") {
    SyntheticView sv = tiny_view(2.0);
    Vector xt(2);
    xt << 1.0, 1.0;
    const MuCoefficients c = mu_coefficients(sv.view, xt);
    CHECK(c.alpha[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c.alpha[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c.beta[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c.beta[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_FALSE(c.degenerate);
}

TEST_CASE("zero counts drop from alpha") {
    SyntheticView sv = tiny_view(0.0);
    Vector xt(2);
    xt << 1.0, 1.0;
    const MuCoefficients c = mu_coefficients(sv.view, xt);
    CHECK(c.alpha.norm() == 0.0);
    CHECK(c.beta[0] == 1.0);
    CHECK(c.beta[1] == 1.0);
}

TEST_CASE("sigma_R contributes symmetrically to alpha and beta") {
    SyntheticView sv = tiny_view(2.0);
    add_zero_relsmooth(sv.view, 1.0, 2);
    Vector xt(2);
    xt << 1.0, 1.0;
    const MuCoefficients c = mu_coefficients(sv.view, xt);
    CHECK(c.alpha[0] == doctest::Approx(2.0).epsilon(1e-15));  // 1 + sigma_R / x_t
    CHECK(c.beta[0] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("degenerate all-zero column is flagged") {
    Matrix A(2, 2);
    A << 1, 0, 2, 0;
    Vector b(2);
    b << 1.0, 1.0;
    SyntheticView sv = make_green_view(A, b);
    Vector xt(2);
    xt << 1.0, 1.0;
    const MuCoefficients c = mu_coefficients(sv.view, xt);
    CHECK(c.degenerate);
}

TEST_CASE("mu_update") {
    Vector xt(2);
    xt << 1.0, 1.0;
    SUBCASE("fixed point when alpha == beta") {
        MuCoefficients c;
        c.alpha = Vector::Constant(2, 1.7);
        c.beta = Vector::Constant(2, 1.7);
        CHECK((mu_update(xt, c, kEps) - xt).norm() == 0.0);
    }
    SUBCASE("reaches the stationary sum in one step") {
        MuCoefficients c;
        c.alpha = Vector::Constant(2, 2.0);
        c.beta = Vector::Constant(2, 1.0);
        const Vector x = mu_update(xt, c, kEps);
        CHECK(x[0] == 2.0);
        CHECK(x[1] == 2.0);
        // For A = [[1,1]], b = [4]: the 1-D stationarity -4/s + 1 = 0 at s=4.
        CHECK(x.sum() == doctest::Approx(4.0));
    }
    SUBCASE("zero alpha clamps to epsilon") {
        MuCoefficients c;
        c.alpha = Vector::Zero(2);
        c.beta = Vector::Ones(2);
        const Vector x = mu_update(xt, c, kEps);
        CHECK(x[0] == kEps);
        CHECK(x[1] == kEps);
    }
    SUBCASE("nonpositive beta is an update error") {
        MuCoefficients c;
        c.alpha = Vector::Ones(2);
        c.beta = Vector::Zero(2);
        CHECK_THROWS_AS(mu_update(xt, c, kEps), UpdateError);
    }
}

TEST_CASE("qu_coefficients on the basic examples") {
    Vector xt2(2);
    xt2 << 1.0, 1.0;
    SUBCASE("no regularizers") {
        SyntheticView sv = tiny_view(2.0);
        const QuCoefficients c = qu_coefficients(sv.view, xt2);
        CHECK(c.alpha == 0.0);
        CHECK(c.beta[0] == doctest::Approx(1.0));
        CHECK(c.zeta[0] == doctest::Approx(1.0));
    }
    SUBCASE("lipschitz contributes alpha = 2 sigma and -2 sigma x_t to beta") {
        Vector xt(1);
        xt << 1.0;
        SubproblemView view;
        view.A = std::make_shared<Matrix>(Matrix::Zero(0, 1));
        view.b = Vector(0);
        view.has_lipschitz = true;
        view.sigma_L = 0.5;
        view.grad_sL = Vector::Zero(1);
        const QuCoefficients c = qu_coefficients(view, xt);
        CHECK(c.alpha == doctest::Approx(1.0));
        CHECK(c.beta[0] == doctest::Approx(-1.0));
    }
    SUBCASE("sigma_R adds to zeta") {
        SyntheticView sv = tiny_view(2.0);
        add_zero_relsmooth(sv.view, 0.7, 2);
        const QuCoefficients c = qu_coefficients(sv.view, xt2);
        CHECK(c.zeta[0] == doctest::Approx(1.7));
    }
}

TEST_CASE("qu_update roots and limits") {
    Vector xt(1);
    xt << 1.0;
    QuCoefficients c;
    c.beta = Vector(1);
    c.zeta = Vector(1);
    SUBCASE("positive root") {
        c.alpha = 1.0;
        c.beta << 0.0;
        c.zeta << 1.0;
        CHECK(qu_update(xt, c, kEps)[0] == doctest::Approx(1.0));
    }
    SUBCASE("linear limit at alpha = 0") {
        c.alpha = 0.0;
        c.beta << 1.0;
        c.zeta << 2.0;
        CHECK(qu_update(xt, c, kEps)[0] == doctest::Approx(2.0));
    }
    SUBCASE("degenerate zeta = 0 clamps at epsilon") {
        c.alpha = 2.0;
        c.beta << 1.0;
        c.zeta << 0.0;
        CHECK(qu_update(xt, c, kEps)[0] == kEps);
    }
    SUBCASE("alpha = 0 with nonpositive beta is an update error") {
        c.alpha = 0.0;
        c.beta << -1.0;
        c.zeta << 1.0;
        CHECK_THROWS_AS(qu_update(xt, c, kEps), UpdateError);
    }
}

TEST_CASE("mu_update reduces to the classic multiplicative rule") {
    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const Index dim = 2 + static_cast<Index>(rng.next_u64() % 3);
        const Index rows = 3 + static_cast<Index>(rng.next_u64() % 4);
        SyntheticView sv = make_green_view(random_matrix(rng, rows, dim, 0.05, 2.0),
                                           random_vector(rng, rows, 0.2, 3.0));
        const Vector xt = random_vector(rng, dim, 0.2, 3.0);
        const Vector ours = mu_update(xt, mu_coefficients(sv.view, xt), kEps);
        // x o (A'(b / Ax)) / (A'1)
        const Matrix& A = *sv.A;
        const Vector ratios = sv.view.b.cwiseQuotient(A * xt);
        const Vector classic =
            xt.cwiseProduct(A.transpose() * ratios).cwiseQuotient(A.transpose() * Vector::Ones(rows));
        for (Index j = 0; j < dim; ++j) {
            CHECK(std::abs(ours[j] - std::max(classic[j], kEps)) <= 1e-12 * std::abs(classic[j]));
        }
    }
}

TEST_CASE("MU and QU updates minimize their surrogates (interior stationarity)") {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const Index dim = 2 + static_cast<Index>(rng.next_u64() % 3);
        SyntheticView sv = make_green_view(random_matrix(rng, 4, dim, 0.1, 2.0),
                                           random_vector(rng, 4, 0.5, 3.0));
        Eigen::MatrixXd R(dim, dim);
        for (Index i = 0; i < dim; ++i) {
            for (Index j = 0; j < dim; ++j) {
                R(i, j) = rng.uniform(-0.5, 0.5);
            }
        }
        add_quadratic_part(sv.view, R.transpose() * R, random_vector(rng, dim, -0.3, 0.3));
        add_zero_relsmooth(sv.view, 0.5, dim);
        add_sparsity_part(sv.view, 1.0);
        const Vector xt = random_vector(rng, dim, 0.3, 2.0);
        refresh_slices(sv.view, xt);

        const Vector x_mu = mu_update(xt, mu_coefficients(sv.view, xt), kEps);
        const Vector x_qu = qu_update(xt, qu_coefficients(sv.view, xt), kEps);
        for (auto [kind, x] : {std::pair{SurrogateKind::MuLog, x_mu},
                               std::pair{SurrogateKind::QuQuadratic, x_qu}}) {
            const double scale = 1.0 + std::abs(surrogate_value(kind, x, xt, sv.view));
            for (Index j = 0; j < dim; ++j) {
                if (x[j] <= kEps * 1.01) {
                    continue;
                }
                const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
                Vector hi = x, lo = x;
                hi[j] += h;
                lo[j] -= h;
                const double d = (surrogate_value(kind, hi, xt, sv.view) -
                                  surrogate_value(kind, lo, xt, sv.view)) /
                                 (2.0 * h);
                CHECK(std::abs(d) <= 1e-6 * scale);
            }
        }
    }
}

TEST_CASE("brackets hold their sign conditions on random draws") {
    Rng rng(13);
    for (int trial = 0; trial < 1000; ++trial) {
        const Index dim = 2 + static_cast<Index>(rng.next_u64() % 5);
        const double eps = trial % 2 == 0 ? 1e-8 : 1e-3;
        Vector e(dim);
        for (Index j = 0; j < dim; ++j) {
            e[j] = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0.1, 2.0);
        }
        e[static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(dim))] =
            rng.uniform(0.1, 2.0);
        const Vector xt = random_vector(rng, dim, 0.05, 3.0);

        MuCoefficients mc;
        mc.alpha = random_vector(rng, dim, 0.05, 4.0);
        mc.beta = random_vector(rng, dim, -2.0, 5.0);
        const Bracket b1 = mu_bracket(xt, mc, e, eps);
        const Vector c = xt.cwiseProduct(mc.alpha);
        CHECK(h1_value(b1.nu_up, c, mc.beta, e, eps) >= 0.0);
        CHECK(h1_value(b1.nu_low, c, mc.beta, e, eps) <= 0.0);

        QuCoefficients qc;
        qc.alpha = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0.05, 4.0);
        qc.beta = random_vector(rng, dim, -2.0, 5.0);
        qc.zeta = random_vector(rng, dim, 0.05, 4.0);
        const Bracket b2 = qu_bracket(xt, qc, e, eps);
        CHECK(h2_value(b2.nu_up, qc.alpha, qc.beta, qc.zeta, e, eps) >= 0.0);
        CHECK(h2_value(b2.nu_low, qc.alpha, qc.beta, qc.zeta, e, eps) <= 0.0);
    }
}

TEST_CASE("single active entry: closed-form dual inside the bracket") {
    Vector e(1), xt(1);
    e << 1.0;
    xt << 0.8;
    MuCoefficients c;
    c.alpha = Vector::Constant(1, 2.0);
    c.beta = Vector::Constant(1, 0.7);
    // e' x = 1 forces x = 1, so nu = x_t alpha - beta.
    const double nu_star = xt[0] * c.alpha[0] - c.beta[0];
    const Bracket b = mu_bracket(xt, c, e, 1e-8);
    CHECK(b.nu_up <= nu_star + 1e-12);
    CHECK(b.nu_low >= nu_star - 1e-12);
    DualSolve info;
    const Vector x = mu_update_simplex(xt, c, e, 1e-8, {}, &info);
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(info.nu == doctest::Approx(nu_star).epsilon(1e-9));
}

TEST_CASE("dual_dichotomy on simple functions") {
    SUBCASE("h(nu) = 1 - nu on [0, 2]") {
        const DualSolve s = dual_dichotomy([](double nu) { return 1.0 - nu; }, {0.0, 2.0},
                                           1e-12, 200);
        CHECK(s.nu == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(s.residual <= 1e-12);
        CHECK_FALSE(s.warning);
    }
    SUBCASE("root at the bracket endpoint") {
        const DualSolve s = dual_dichotomy([](double nu) { return -nu; }, {0.0, 2.0}, 1e-12, 200);
        CHECK(s.nu == 0.0);
    }
    SUBCASE("non-bracketing endpoints throw") {
        CHECK_THROWS_AS(dual_dichotomy([](double nu) { return 1.0 + nu; }, {0.0, 2.0}, 1e-12, 200),
                        BracketError);
    }
}

TEST_CASE("constrained updates satisfy the generalized simplex") {
    Rng rng(14);
    SUBCASE("symmetric instance lands on the uniform vector") {
        const Index k = 4;
        Vector e = Vector::Ones(k);
        Vector xt = Vector::Constant(k, 0.3);
        MuCoefficients mc;
        mc.alpha = Vector::Constant(k, 2.0);
        mc.beta = Vector::Constant(k, 1.1);
        const Vector x = mu_update_simplex(xt, mc, e, 1e-8);
        for (Index j = 0; j < k; ++j) {
            CHECK(x[j] == doctest::Approx(0.25).epsilon(1e-10));
        }
        QuCoefficients qc;
        qc.alpha = 1.3;
        qc.beta = Vector::Constant(k, 0.4);
        qc.zeta = Vector::Constant(k, 0.9);
        const Vector xq = qu_update_simplex(xt, qc, e, 1e-8);
        for (Index j = 0; j < k; ++j) {
            CHECK(xq[j] == doctest::Approx(0.25).epsilon(1e-10));
        }
        // e uniform but not 1: entries equalize to 1/|e|_1.
        Vector e2 = Vector::Constant(k, 0.5);
        const Vector xq2 = qu_update_simplex(xt, qc, e2, 1e-8);
        for (Index j = 0; j < k; ++j) {
            CHECK(xq2[j] == doctest::Approx(0.5).epsilon(1e-10));
        }
    }
    SUBCASE("already-feasible unconstrained update is untouched") {
        // Choose coefficients whose unconstrained update sums to one.
        const Index k = 2;
        Vector e = Vector::Ones(k);
        Vector xt = Vector::Constant(k, 0.5);
        MuCoefficients mc;
        mc.alpha = Vector::Constant(k, 3.0);
        mc.beta = Vector::Constant(k, 3.0);
        const Vector unconstrained = mu_update(xt, mc, 1e-8);
        CHECK(unconstrained.sum() == doctest::Approx(1.0));
        const Vector x = mu_update_simplex(xt, mc, e, 1e-8);
        CHECK((x - unconstrained).norm() <= 1e-9);
    }
    SUBCASE("random instances: constraint and floor hold") {
        for (int trial = 0; trial < 200; ++trial) {
            const Index dim = 2 + static_cast<Index>(rng.next_u64() % 4);
            Vector e(dim);
            for (Index j = 0; j < dim; ++j) {
                e[j] = rng.uniform() < 0.25 ? 0.0 : rng.uniform(0.2, 2.0);
            }
            e[0] = rng.uniform(0.2, 2.0);
            const Vector xt = random_vector(rng, dim, 0.05, 2.0);
            MuCoefficients mc;
            mc.alpha = random_vector(rng, dim, 0.1, 4.0);
            mc.beta = random_vector(rng, dim, 0.1, 4.0);
            DualSolve info;
            const Vector x = mu_update_simplex(xt, mc, e, 1e-8, {}, &info);
            CHECK(std::abs(e.dot(x) - 1.0) <= 1e-9);
            CHECK(x.minCoeff() >= 1e-8);

            QuCoefficients qc;
            qc.alpha = rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.1, 3.0);
            // beta <= 0 with alpha = 0 leaves unconstrained entries unbounded.
            qc.beta = qc.alpha == 0.0 ? random_vector(rng, dim, 0.1, 4.0)
                                      : random_vector(rng, dim, -1.0, 4.0);
            qc.zeta = random_vector(rng, dim, 0.1, 4.0);
            const Vector xq = qu_update_simplex(xt, qc, e, 1e-8, {}, &info);
            CHECK(std::abs(e.dot(xq) - 1.0) <= 1e-9);
            CHECK(xq.minCoeff() >= 1e-8);
        }
    }
    SUBCASE("alpha -> 0 reduces the quadratic dual to the linear one") {
        const Index k = 3;
        Vector e = Vector::Ones(k);
        const Vector xt = Vector::Constant(k, 0.4);
        QuCoefficients qc;
        qc.alpha = 0.0;
        qc.beta = random_vector(rng, k, 0.5, 2.0);
        qc.zeta = random_vector(rng, k, 0.5, 2.0);
        const Vector xq = qu_update_simplex(xt, qc, e, 1e-8);
        // Same dual problem as the log-family with c = zeta.
        const Vector xl = log_family_update_simplex(qc.zeta, qc.beta, e, 1e-8);
        CHECK((xq - xl).norm() <= 1e-8);
    }
}

TEST_CASE("dual functions are nonincreasing in nu") {
    Rng rng(15);
    for (int trial = 0; trial < 50; ++trial) {
        const Index dim = 3;
        const Vector e = random_vector(rng, dim, 0.2, 2.0);
        const Vector c = random_vector(rng, dim, 0.1, 3.0);
        const Vector beta = random_vector(rng, dim, 0.1, 3.0);
        const Vector zeta = random_vector(rng, dim, 0.1, 3.0);
        const double alpha = rng.uniform(0.1, 2.0);
        double prev1 = std::numeric_limits<double>::infinity();
        double prev2 = std::numeric_limits<double>::infinity();
        for (double nu = -5.0; nu <= 40.0; nu += 0.25) {
            const double v1 = h1_value(nu, c, beta, e, 1e-8);
            const double v2 = h2_value(nu, alpha, beta, zeta, e, 1e-8);
            CHECK(v1 <= prev1 + 1e-12);
            CHECK(v2 <= prev2 + 1e-12);
            prev1 = v1;
            prev2 = v2;
        }
    }
}

TEST_CASE("warm start stays consistent with the cold solve") {
    Rng rng(16);
    const Index dim = 4;
    const Vector e = Vector::Ones(dim);
    const Vector xt = random_vector(rng, dim, 0.1, 1.0);
    MuCoefficients mc;
    mc.alpha = random_vector(rng, dim, 0.5, 2.0);
    mc.beta = random_vector(rng, dim, 0.5, 2.0);
    DualSolve cold;
    const Vector x_cold = mu_update_simplex(xt, mc, e, 1e-8, {}, &cold);
    DichotomyOptions opts;
    opts.warm_start = cold.nu + 1e-4;
    DualSolve warm;
    const Vector x_warm = mu_update_simplex(xt, mc, e, 1e-8, opts, &warm);
    CHECK((x_cold - x_warm).lpNorm<Eigen::Infinity>() <= 1e-8);
    // A warm start at the solved dual short-circuits the bisection.
    opts.warm_start = cold.nu;
    DualSolve exact;
    mu_update_simplex(xt, mc, e, 1e-8, opts, &exact);
    CHECK(exact.iterations == 0);
}
