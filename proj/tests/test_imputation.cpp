#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "prices/error.hpp"
#include "prices/fixtures.hpp"
#include "prices/imputation.hpp"
#include "prices/regression.hpp"

using namespace prices;
using namespace prices::imputation;
using regression::Design;

namespace {

Design random_design(std::mt19937_64& gen, std::size_t n, std::size_t k) {
    std::normal_distribution<double> z;
    Design d;
    d.names.push_back("const");
    for (std::size_t j = 1; j < k; ++j) d.names.push_back("x" + std::to_string(j));
    d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < n; ++i) {
        d.x(i, 0) = 1.0;
        for (std::size_t j = 1; j < k; ++j) d.x(i, j) = z(gen);
    }
    return d;
}

// Maximiser of a unimodal function on [a, b].
template <class F>
double golden_section(F f, double a, double b) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a), d = a + r * (b - a);
    while (b - a > 1e-10) {
        if (f(c) > f(d)) b = d;
        else a = c;
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    return 0.5 * (a + b);
}

}  // namespace

TEST_CASE("Chauvenet criterion") {
    const std::vector<double> v = {1, 1, 1, 1, 100};
    // mean 20.8, sd 44.27, z = 1.789, expected count 5 * 0.0736 = 0.368 < 0.5
    const auto out = chauvenet_outliers(v);
    CHECK(out == std::vector<bool>{false, false, false, false, true});
    const std::vector<double> flat = {3, 3, 3};
    CHECK(chauvenet_outliers(flat) == std::vector<bool>{false, false, false});
    const std::vector<double> mild = {1, 2, 3, 4, 5};
    CHECK(chauvenet_outliers(mild) == std::vector<bool>(5, false));
}

TEST_CASE("income calibration matches target moments on the retained sample") {
    std::vector<double> y = {10, 12, 9, 11, 13, 8, 10, 500};
    const auto c = calibrate_income(y, 1000.0, 50.0);
    CHECK(c.outliers() == 1);
    CHECK(c.outlier.back());
    std::vector<double> kept(c.values.begin(), c.values.end() - 1);
    const auto [m, s] = mean_sd(kept);
    CHECK(m == doctest::Approx(1000.0).epsilon(1e-12));
    CHECK(s == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(c.values.back() == doctest::Approx(c.shift + c.scale * 500.0));
    const std::vector<double> same = {4, 4, 4, 4};
    CHECK_THROWS_AS(calibrate_income(same, 1, 1), DataError);
}

TEST_CASE("weighted least squares against the normal equations") {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u(0.5, 2.0);
    const auto d = random_design(gen, 300, 4);
    std::vector<double> y(300), w(300);
    for (std::size_t i = 0; i < 300; ++i) {
        y[i] = 1.0 + 2.0 * d.x(i, 1) - 0.5 * d.x(i, 2) + 0.3 * d.x(i, 3) + 0.2 * z(gen);
        w[i] = u(gen);
    }
    const auto fit = regression::wls_fit(d, y, w);
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), 300), wv(w.data(), 300);
    const Eigen::MatrixXd xtw = d.x.transpose() * wv.asDiagonal();
    const Eigen::VectorXd beta = (xtw * d.x).inverse() * (xtw * yv);
    for (int j = 0; j < 4; ++j) CHECK(fit.coefficients(j) == doctest::Approx(beta(j)).epsilon(1e-8));
    const Eigen::VectorXd r = yv - d.x * beta;
    const double mean_r = (wv.array() * r.array()).sum() / wv.sum();
    CHECK(std::abs(fit.residual_mean - mean_r) < 1e-10);
    CHECK(fit.n_obs == 300);

    Design dup = d;
    dup.x.col(3) = 2.0 * dup.x.col(2);
    CHECK_THROWS_AS(regression::wls_fit(dup, y, w), regression::RankDeficientError);
}

TEST_CASE("binary response fit maximises the likelihood") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto link : {regression::Link::logit, regression::Link::probit}) {
        const auto d = random_design(gen, 400, 2);
        std::vector<double> ind(400), w(400, 1.0);
        for (std::size_t i = 0; i < 400; ++i)
            ind[i] = u(gen) < regression::link_cdf(link, 0.3 + 0.8 * d.x(i, 1)) ? 1.0 : 0.0;
        const auto fit = regression::binary_fit(d, ind, w, link);
        // Coordinate-wise golden-section search of the log-likelihood.
        for (int j = 0; j < 2; ++j) {
            Eigen::VectorXd b = fit.coefficients;
            const double best = golden_section(
                [&](double v) {
                    b(j) = v;
                    return regression::log_likelihood(d, ind, w, link, b);
                },
                fit.coefficients(j) - 2.0, fit.coefficients(j) + 2.0);
            CHECK(best == doctest::Approx(fit.coefficients(j)).epsilon(1e-6));
        }
        CHECK(fit.log_likelihood == doctest::Approx(regression::log_likelihood(d, ind, w, link, fit.coefficients)));
    }
}

TEST_CASE("binary fit: intercept-only model recovers the weighted share") {
    Design d;
    d.names = {"const"};
    d.x = Eigen::MatrixXd::Ones(5, 1);
    const std::vector<double> ind = {1, 0, 1, 1, 0}, w = {1, 1, 2, 1, 1};
    const auto fit = regression::binary_fit(d, ind, w);
    CHECK(fit.probability(d.x.row(0)) == doctest::Approx(4.0 / 6.0).epsilon(1e-9));
}

TEST_CASE("binary fit drops collinear columns and rejects separation") {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto d = random_design(gen, 200, 3);
    d.x.col(2) = d.x.col(1);
    std::vector<double> ind(200), w(200, 1.0);
    for (std::size_t i = 0; i < 200; ++i) ind[i] = u(gen) < 0.4 ? 1.0 : 0.0;
    const auto fit = regression::binary_fit(d, ind, w);
    REQUIRE(fit.dropped.size() == 1);
    CHECK(fit.dropped[0] == "x2");
    CHECK(fit.coefficients(2) == 0.0);

    auto sep = random_design(gen, 50, 2);
    for (std::size_t i = 0; i < 50; ++i) ind[i] = sep.x(i, 1) > 0 ? 1.0 : 0.0;
    ind.resize(50);
    w.resize(50);
    CHECK_THROWS_AS(regression::binary_fit(sep, ind, w), NumericalError);
}

TEST_CASE("participation matches the target share") {
    const std::vector<double> p = {0.9, 0.1, 0.5, 0.7, 0.3, 0.8, 0.2, 0.6, 0.4, 0.55};
    const std::vector<double> w(10, 1.0);
    const auto d = impute_participation(p, w, 0.6);
    CHECK(std::accumulate(d.begin(), d.end(), 0) == 6);
    CHECK(d == std::vector<int>{1, 0, 1, 1, 0, 1, 0, 1, 0, 1});
    // Ties keep record order.
    const std::vector<double> tie(4, 0.5), w4(4, 1.0);
    CHECK(impute_participation(tie, w4, 0.5) == std::vector<int>{1, 1, 0, 0});
    CHECK(impute_participation(tie, w4, 0.0) == std::vector<int>{0, 0, 0, 0});
    CHECK(impute_participation(tie, w4, 1.0) == std::vector<int>{1, 1, 1, 1});
}

TEST_CASE("budget share post-processing") {
    const std::vector<double> pred = {0.5, 0.3, 0.4};
    const std::vector<int> all = {1, 1, 1};
    const auto w = impute_budget_shares(pred, all);
    CHECK(w[0] == doctest::Approx(0.4167).epsilon(1e-4));
    CHECK(w[1] == doctest::Approx(0.25));
    CHECK(w[2] == doctest::Approx(1.0 / 3.0));

    const std::vector<double> neg = {0.5, -0.2, 0.5};
    const auto w2 = impute_budget_shares(neg, all);
    CHECK(w2 == std::vector<double>{0.5, 0.0, 0.5});
    const std::vector<int> some = {0, 1, 1};
    CHECK(impute_budget_shares(pred, some)[0] == 0.0);

    const std::vector<int> none = {0, 0, 0};
    CHECK_THROWS_AS(impute_budget_shares(pred, none, "r7"), DataError);
}

TEST_CASE("record seeds") {
    CHECK(record_seed(1, "a") == record_seed(1, "a"));
    CHECK(record_seed(1, "a") != record_seed(1, "b"));
    CHECK(record_seed(1, "a") != record_seed(2, "a"));
    CHECK(stream_seed(5, 0) != stream_seed(5, 1));
}

TEST_CASE("expenditure disturbances follow the fitted moments") {
    const std::size_t n = 20000;
    std::vector<HouseholdRecord> recs(n);
    for (std::size_t i = 0; i < n; ++i) {
        recs[i].id = "r" + std::to_string(i);
        recs[i].disposable_income = 1000.0;
    }
    CovariateSpec spec;
    spec.size_bands = false;
    spec.indicators.clear();
    spec.head_age_bands = false;
    regression::RegressionFit fit;
    fit.names = {"const", "ln_income"};
    fit.coefficients = Eigen::Vector2d(0.5, 0.9);
    fit.residual_mean = 0.1;
    fit.residual_variance = 0.04;
    const auto x = impute_total_expenditure(recs, fit, spec, 99);
    const double pred = 0.5 + 0.9 * std::log(1000.0);
    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) e[i] = std::log(x[i]) - pred;
    const auto [m, s] = mean_sd(e);
    CHECK(m == doctest::Approx(0.1).epsilon(0.02));
    CHECK(s * s == doctest::Approx(0.04).epsilon(0.02));

    // Draws depend on the record, not on its position.
    std::vector<HouseholdRecord> rev(recs.rbegin(), recs.rend());
    const auto xr = impute_total_expenditure(rev, fit, spec, 99, kernels::Execution::serial);
    CHECK(xr[0] == x[n - 1]);
}

TEST_CASE("covariates") {
    CovariateSpec spec;
    CHECK(spec.names() == std::vector<std::string>{"size_3_5", "size_6p", "urban", "head_age_35_54", "head_age_55p"});
    HouseholdRecord h;
    h.id = "x";
    h.size = 4;
    h.demographics = {{"urban", 1.0}, {"head_age", 60.0}};
    CHECK(spec.values(h) == std::vector<double>{1, 0, 1, 0, 1});
    h.demographics.erase("urban");
    CHECK_THROWS_AS(spec.values(h), DataError);
}

TEST_CASE("imputation of the fixture survey onto its own income records") {
    const auto survey = fixtures::households();
    std::vector<HouseholdRecord> income = survey;
    for (auto& h : income) h.expenditure.clear();

    ImputationOptions opt;
    opt.seed = 42;
    const auto a = impute(survey, income, opt);
    REQUIRE(a.records.size() == income.size());
    CHECK(a.model.target_share[0] == 1.0);
    CHECK(a.model.target_share[1] == 0.0);
    CHECK(!a.model.participation[0]);
    CHECK(!a.model.shares[1]);

    double food = 0.0, tobacco_buyers = 0.0;
    for (const auto& h : a.records) {
        REQUIRE(h.expenditure.size() == 19);
        CHECK(h.total_expenditure() > 0.0);
        CHECK(h.expenditure[1] == 0.0);
        food += h.expenditure[0] > 0.0;
        tobacco_buyers += h.expenditure[2] > 0.0;
    }
    CHECK(food == 500);
    CHECK(tobacco_buyers / 500.0 == doctest::Approx(a.model.target_share[2]).epsilon(0.01));

    // Indicator shares hit the targets; floored participants are the only spending gap.
    REQUIRE(a.participation.size() == 500);
    std::size_t floored = 0;
    for (std::size_t c = 0; c < 19; ++c) {
        double part = 0.0, weight = 0.0;
        for (std::size_t i = 0; i < 500; ++i) {
            part += a.participation[i][c] * a.records[i].weight;
            weight += a.records[i].weight;
            if (a.participation[i][c] == 0) CHECK(a.records[i].expenditure[c] == 0.0);
            floored += a.participation[i][c] == 1 && a.records[i].expenditure[c] == 0.0;
        }
        CHECK(std::abs(part / weight - a.model.target_share[c]) <= 1.0 / 500.0);
    }
    CHECK(floored == a.floored_participants);

    SUBCASE("deterministic and independent of execution mode") {
        opt.exec = kernels::Execution::serial;
        const auto b = impute(survey, income, opt);
        for (std::size_t i = 0; i < a.records.size(); ++i) CHECK(a.records[i].expenditure == b.records[i].expenditure);
    }
    SUBCASE("seed changes the draws") {
        opt.seed = 43;
        const auto b = impute(survey, income, opt);
        CHECK(a.records[0].expenditure != b.records[0].expenditure);
    }
    SUBCASE("provenance columns") {
        const auto cols = provenance_columns(a);
        REQUIRE(cols.size() == 3);
        CHECK(cols[0].name == "imp_flag");
        CHECK(cols[1].values[0] == std::to_string(record_seed(42, "hh1")));
        CHECK(cols[2].values[0] == kModelVersion);
        const auto text = format_household_survey(a.records, CategorySet::canonical(), cols);
        CHECK(text.find("imp_model_version") != std::string::npos);
    }
}
