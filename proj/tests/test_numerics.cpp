#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "qdtk/numerics/least_squares.hpp"
#include "qdtk/numerics/stats.hpp"

using namespace qdtk::numerics;

namespace {

struct GaussData {
    std::vector<double> x;
    std::vector<double> y;
};

GaussData gaussian_profile(double amp, double center, double sigma, double offset, int n) {
    GaussData d;
    for (int i = 0; i < n; ++i) {
        const double x = i;
        d.x.push_back(x);
        d.y.push_back(offset + amp * std::exp(-0.5 * std::pow((x - center) / sigma, 2)));
    }
    return d;
}

double gauss(double x, const Vector& p) {
    return p[3] + p[0] * std::exp(-0.5 * std::pow((x - p[1]) / p[2], 2));
}

}  // namespace

TEST(LeastSquares, ExactLinearFit) {
    std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y;
    for (double v : x) y.push_back(2.0 * v);
    auto r = fit_function([](double t, const Vector& p) { return p[0] * t; }, x, y, Vector::Constant(1, 0.5));
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.params[0], 2.0, 1e-12);
    EXPECT_NEAR(r.rss, 0.0, 1e-20);
}

TEST(LeastSquares, NoiselessGaussianCenter) {
    auto d = gaussian_profile(1000.0, 250.0, 8.0, 0.0, 500);
    Vector p0(4);
    p0 << 900.0, 246.0, 10.0, 5.0;
    auto r = fit_function(gauss, d.x, d.y, p0);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.params[1], 250.0, 1e-6);
    EXPECT_NEAR(r.params[2], 8.0, 1e-6);
}

TEST(LeastSquares, OlsStandardErrorsMatchClosedForm) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> noise(0.0, 0.3);
    std::vector<double> x;
    std::vector<double> y;
    for (int i = 0; i < 40; ++i) {
        x.push_back(0.25 * i);
        y.push_back(1.5 - 0.7 * x.back() + noise(rng));
    }
    auto r = fit_function([](double t, const Vector& p) { return p[0] + p[1] * t; }, x, y, Vector::Zero(2));
    auto ols = fit_line(x, y);
    EXPECT_NEAR(r.params[0], ols.intercept, 1e-9 * std::abs(ols.intercept));
    EXPECT_NEAR(r.params[1], ols.slope, 1e-9 * std::abs(ols.slope));
    EXPECT_NEAR(r.std_errors[0] / ols.intercept_sigma, 1.0, 1e-9);
    EXPECT_NEAR(r.std_errors[1] / ols.slope_sigma, 1.0, 1e-9);
}

TEST(LeastSquares, ScaleEquivariance) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0.0, 20.0);
    auto d = gaussian_profile(800.0, 101.3, 6.5, 50.0, 200);
    for (double& v : d.y) v += noise(rng);
    Vector p0(4);
    p0 << 700.0, 100.0, 7.0, 40.0;
    auto base = fit_function(gauss, d.x, d.y, p0);

    const double c = 3.0;
    std::vector<double> scaled = d.y;
    for (double& v : scaled) v *= c;
    Vector q0 = p0;
    q0[0] *= c;
    q0[3] *= c;
    auto sc = fit_function(gauss, d.x, scaled, q0);

    EXPECT_NEAR(sc.params[0] / (c * base.params[0]), 1.0, 1e-9);
    EXPECT_NEAR(sc.std_errors[0] / (c * base.std_errors[0]), 1.0, 1e-9);
    EXPECT_NEAR(sc.params[1] / base.params[1], 1.0, 1e-9);
    EXPECT_NEAR(sc.params[2] / base.params[2], 1.0, 1e-9);
    EXPECT_NEAR(sc.std_errors[1] / base.std_errors[1], 1.0, 1e-9);
}

TEST(LeastSquares, BitwiseReproducible) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 5.0);
    auto d = gaussian_profile(100.0, 60.0, 4.0, 10.0, 120);
    for (double& v : d.y) v += noise(rng);
    Vector p0(4);
    p0 << 80.0, 58.0, 5.0, 8.0;
    auto a = fit_function(gauss, d.x, d.y, p0);
    auto b = fit_function(gauss, d.x, d.y, p0);
    EXPECT_EQ(a.iterations, b.iterations);
    for (Index i = 0; i < 4; ++i) {
        EXPECT_EQ(a.params[i], b.params[i]);
        EXPECT_EQ(a.std_errors[i], b.std_errors[i]);
    }
    EXPECT_EQ(a.rss, b.rss);
}

TEST(LeastSquares, CovarianceIsSymmetricPsd) {
    auto d = gaussian_profile(100.0, 60.0, 4.0, 10.0, 120);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 2.0);
    for (double& v : d.y) v += noise(rng);
    Vector p0(4);
    p0 << 90.0, 59.0, 5.0, 8.0;
    auto r = fit_function(gauss, d.x, d.y, p0);
    EXPECT_EQ(r.covariance, r.covariance.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(r.covariance);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * es.eigenvalues().maxCoeff());
    for (Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(r.std_errors[i], std::sqrt(r.covariance(i, i)));
}

TEST(LeastSquares, UnderdeterminedThrows) {
    std::vector<double> x{1, 2};
    std::vector<double> y{1, 2};
    auto f = [](double t, const Vector& p) { return p[0] + p[1] * t; };
    EXPECT_THROW(fit_function(f, x, y, Vector::Zero(2)), qdtk::InputError);
}

TEST(LeastSquares, NonFiniteInitialThrows) {
    std::vector<double> x{1, 2, 3};
    std::vector<double> y{1, 2, 3};
    Vector p0 = Vector::Constant(1, std::nan(""));
    EXPECT_THROW(fit_function([](double t, const Vector& p) { return p[0] * t; }, x, y, p0), qdtk::InputError);
}

TEST(LeastSquares, InitialOutsideBoundsThrows) {
    std::vector<double> x{1, 2, 3};
    std::vector<double> y{1, 2, 3};
    CurveFitOptions opt;
    opt.lower = Vector::Constant(1, 0.0);
    opt.upper = Vector::Constant(1, 1.0);
    EXPECT_THROW(fit_function([](double t, const Vector& p) { return p[0] * t; }, x, y, Vector::Constant(1, 2.0), opt),
                 qdtk::InputError);
}

TEST(LeastSquares, BoundsAreRespected) {
    std::vector<double> x{1, 2, 3, 4};
    std::vector<double> y{2, 4, 6, 8};
    CurveFitOptions opt;
    opt.lower = Vector::Constant(1, 0.0);
    opt.upper = Vector::Constant(1, 1.5);
    auto r = fit_function([](double t, const Vector& p) { return p[0] * t; }, x, y, Vector::Constant(1, 1.0), opt);
    EXPECT_DOUBLE_EQ(r.params[0], 1.5);
}

TEST(LeastSquares, SingularJacobianFlagged) {
    std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y{2, 4, 6, 8, 10};
    auto f = [](double t, const Vector& p) { return (p[0] + p[1]) * t; };
    auto r = fit_function(f, x, y, Vector::Zero(2));
    EXPECT_TRUE(r.singular);
    EXPECT_FALSE(r.warnings.empty());
    EXPECT_NEAR(r.params[0] + r.params[1], 2.0, 1e-9);
}

TEST(LeastSquares, IterationLimitReportsNonConvergence) {
    auto d = gaussian_profile(1000.0, 250.0, 8.0, 0.0, 500);
    Vector p0(4);
    p0 << 500.0, 240.0, 12.0, 5.0;
    CurveFitOptions opt;
    opt.max_iterations = 1;
    auto r = fit_function(gauss, d.x, d.y, p0, opt);
    EXPECT_FALSE(r.converged);
    EXPECT_FALSE(r.warnings.empty());
}

TEST(LeastSquares, AnalyticJacobianAgreesWithDifferences) {
    auto d = gaussian_profile(300.0, 40.0, 5.0, 20.0, 100);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> noise(0.0, 3.0);
    for (double& v : d.y) v += noise(rng);
    auto model = [&](const Vector& p, Vector& out) {
        for (std::size_t i = 0; i < d.x.size(); ++i) out[static_cast<Index>(i)] = gauss(d.x[i], p);
    };
    auto jac = [&](const Vector& p, Matrix& j) {
        for (std::size_t i = 0; i < d.x.size(); ++i) {
            const double u = (d.x[i] - p[1]) / p[2];
            const double e = std::exp(-0.5 * u * u);
            const auto r = static_cast<Index>(i);
            j(r, 0) = e;
            j(r, 1) = p[0] * e * u / p[2];
            j(r, 2) = p[0] * e * u * u / p[2];
            j(r, 3) = 1.0;
        }
    };
    Vector p0(4);
    p0 << 250.0, 38.0, 6.0, 10.0;
    auto fd = fit_curve(model, d.y, p0);
    auto an = fit_curve(model, d.y, p0, {}, jac);
    for (Index i = 0; i < 4; ++i) {
        EXPECT_NEAR(fd.params[i], an.params[i], 1e-6 * std::max(1.0, std::abs(an.params[i])));
        EXPECT_NEAR(fd.std_errors[i] / an.std_errors[i], 1.0, 1e-5);
    }
}

// Monte Carlo: reported std-errors must describe the actual scatter.
TEST(LeastSquares, StdErrorCalibrationPoisson) {
    const auto clean = gaussian_profile(400.0, 60.0, 8.0, 30.0, 120);
    std::mt19937_64 rng(20240611);
    std::vector<double> centers;
    double sum_se = 0.0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> y(clean.y.size());
        std::vector<double> sig(clean.y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            std::poisson_distribution<long> pd(clean.y[i]);
            y[i] = static_cast<double>(pd(rng));
            sig[i] = std::sqrt(std::max(y[i], 1.0));
        }
        CurveFitOptions opt;
        opt.sigma = sig;
        Vector p0(4);
        p0 << 380.0, 59.0, 7.5, 25.0;
        auto r = fit_function(gauss, clean.x, y, p0, opt);
        ASSERT_TRUE(r.converged);
        centers.push_back(r.params[1]);
        sum_se += r.std_errors[1];
    }
    const double empirical = sample_std(centers);
    const double reported = sum_se / trials;
    EXPECT_NEAR(empirical / reported, 1.0, 0.2);
}

TEST(Stats, PercentileAndMedian) {
    std::vector<double> v{5, 1, 3, 2, 4};
    EXPECT_DOUBLE_EQ(median(v), 3.0);
    EXPECT_DOUBLE_EQ(percentile(v, 0), 1.0);
    EXPECT_DOUBLE_EQ(percentile(v, 100), 5.0);
    EXPECT_DOUBLE_EQ(percentile(v, 25), 2.0);
    EXPECT_DOUBLE_EQ(percentile(std::vector<double>{1, 2}, 50), 1.5);
}

TEST(Stats, SampleStd) {
    std::vector<double> v{499, 501};
    EXPECT_NEAR(sample_std(v), std::sqrt(2.0), 1e-15);
    EXPECT_THROW(sample_std(std::vector<double>{1}), qdtk::InputError);
}
