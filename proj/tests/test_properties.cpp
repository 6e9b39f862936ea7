#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "prices/demand.hpp"
#include "prices/distribution.hpp"
#include "prices/io_engine.hpp"
#include "prices/kernels.hpp"
#include "prices/scenario.hpp"

using namespace prices;

namespace {

constexpr int kCases = 1000;

struct RandomLes {
    std::vector<double> shares, eta;
    double xi = -2.0;
    double total = 100.0;
    demand::LesParameters les;
};

RandomLes random_les(std::mt19937_64& gen) {
    std::uniform_int_distribution<int> goods(2, 8);
    std::uniform_real_distribution<double> u(0.05, 1.0), e(0.2, 2.0), xi(-5.0, -1.3), c(10.0, 1e4);
    RandomLes r;
    const int n = goods(gen);
    r.shares.resize(n);
    r.eta.resize(n);
    double s = 0.0, agg = 0.0;
    for (int i = 0; i < n; ++i) s += (r.shares[i] = u(gen));
    for (int i = 0; i < n; ++i) {
        r.shares[i] /= s;
        r.eta[i] = e(gen);
        agg += r.shares[i] * r.eta[i];
    }
    for (auto& v : r.eta) v /= agg;
    r.xi = xi(gen);
    r.total = c(gen);
    std::vector<double> q(n);
    for (int i = 0; i < n; ++i) q[i] = r.shares[i] * r.total;
    const auto el = demand::price_elasticities(r.eta, r.shares, r.xi);
    std::vector<double> own(n);
    for (int i = 0; i < n; ++i) own[i] = el(i, i);
    r.les = demand::les_calibrate(own, r.eta, r.shares, q, r.total);
    return r;
}

std::vector<double> random_prices(std::mt19937_64& gen, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> p(n);
    for (auto& v : p) v = u(gen);
    return p;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Total expenditure restoring utility u at prices p, by bisection on the
// indirect utility function.
double bisect_expenditure(std::span<const double> p, double u, const demand::LesParameters& les, double lo,
                          double hi) {
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (demand::indirect_utility(p, mid, les) < u) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("LES adding-up and homogeneity") {
    std::mt19937_64 gen(101);
    int checked = 0;
    for (int k = 0; k < kCases; ++k) {
        const auto r = random_les(gen);
        const auto p = random_prices(gen, r.les.size(), 0.8, 1.25);
        if (r.les.committed_cost(p) >= r.total) continue;
        const auto x = demand::les_demand(p, r.total, r.les);
        double spend = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) spend += p[i] * x[i];
        CHECK(rel_err(spend, r.total) < 1e-10);

        const double lambda = 0.5 + k % 7;
        std::vector<double> lp(p);
        for (auto& v : lp) v *= lambda;
        const auto y = demand::les_demand(lp, lambda * r.total, r.les);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(rel_err(y[i], x[i]) < 1e-10);
        ++checked;
    }
    CHECK(checked >= kCases * 9 / 10);
}

TEST_CASE("finite-difference elasticities match the additive formula") {
    std::mt19937_64 gen(202);
    for (int k = 0; k < kCases; ++k) {
        const auto r = random_les(gen);
        const std::size_t n = r.les.size();
        const auto formula = demand::price_elasticities(r.eta, r.shares, r.xi);
        const std::vector<double> ones(n, 1.0);
        const auto x0 = demand::les_demand(ones, r.total, r.les);
        const double h = 1e-6;
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<double> up(ones), down(ones);
            up[j] = std::exp(h);
            down[j] = std::exp(-h);
            const auto xu = demand::les_demand(up, r.total, r.les);
            const auto xd = demand::les_demand(down, r.total, r.les);
            for (std::size_t i = 0; i < n; ++i) {
                const double fd = (std::log(xu[i]) - std::log(xd[i])) / (2.0 * h);
                CHECK(std::abs(fd - formula(i, j)) < 1e-4);
            }
        }
        // Budget elasticities too.
        const auto xc = demand::les_demand(ones, r.total * std::exp(h), r.les);
        const auto xe = demand::les_demand(ones, r.total * std::exp(-h), r.les);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs((std::log(xc[i]) - std::log(xe[i])) / (2.0 * h) - r.eta[i]) < 1e-4);
        (void)x0;
    }
}

TEST_CASE("CV and EV against a bisection oracle") {
    std::mt19937_64 gen(303);
    int checked = 0;
    for (int k = 0; k < kCases; ++k) {
        const auto r = random_les(gen);
        const std::size_t n = r.les.size();
        const std::vector<double> p0(n, 1.0);
        const auto p1 = random_prices(gen, n, 1.0, 1.3);  // price rises only
        if (r.les.committed_cost(p1) >= r.total) continue;
        const double cv = demand::compensating_variation(p0, p1, r.total, r.les);
        const double ev = demand::equivalent_variation(p0, p1, r.total, r.les);
        const double u0 = demand::indirect_utility(p0, r.total, r.les);
        const double u1 = demand::indirect_utility(p1, r.total, r.les);
        const double e1 = bisect_expenditure(p1, u0, r.les, r.les.committed_cost(p1), 2.0 * r.total);
        const double e0 = bisect_expenditure(p0, u1, r.les, r.les.committed_cost(p0), r.total);
        CHECK(rel_err(cv, e1 - r.total) < 1e-9);
        CHECK(rel_err(ev, r.total - e0) < 1e-9);
        CHECK(ev <= cv + 1e-9 * r.total);
        ++checked;
    }
    CHECK(checked >= kCases * 9 / 10);
}

TEST_CASE("Neumann series agrees with the direct Leontief inverse") {
    std::mt19937_64 gen(404);
    std::uniform_int_distribution<int> size(2, 15);
    std::uniform_real_distribution<double> u(0.0, 1.0), col(0.05, 0.9);
    for (int k = 0; k < kCases; ++k) {
        const int n = size(gen);
        Eigen::MatrixXd a(n, n);
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += (a(i, j) = u(gen) * (u(gen) < 0.3 ? 0.0 : 1.0));
            const double target = col(gen);
            if (s > 0.0) a.col(j) *= target / s;
        }
        const auto tm = io::TechnologyMatrix::from_coefficients(a);
        const auto d = io::leontief_inverse(tm, io::LeontiefMethod::direct, {}, kernels::Execution::serial);
        const auto s = io::leontief_inverse(tm, io::LeontiefMethod::neumann, {}, kernels::Execution::serial);
        CHECK((d.matrix - s.matrix).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("Gini covariance formula equals the pairwise definition") {
    std::mt19937_64 gen(505);
    std::uniform_int_distribution<int> size(2, 40), level(1, 6);
    std::uniform_real_distribution<double> u(0.1, 100.0), w(0.1, 5.0);
    for (int k = 0; k < kCases; ++k) {
        const int n = size(gen);
        std::vector<double> y(n), wt(n);
        const bool ties = k % 3 == 0;
        for (int i = 0; i < n; ++i) {
            y[i] = ties ? level(gen) : u(gen);
            wt[i] = w(gen);
        }
        double num = 0.0, wsum = 0.0, mean = 0.0;
        for (int i = 0; i < n; ++i) {
            wsum += wt[i];
            mean += wt[i] * y[i];
            for (int j = 0; j < n; ++j) num += wt[i] * wt[j] * std::abs(y[i] - y[j]);
        }
        mean /= wsum;
        const double oracle = num / (2.0 * wsum * wsum * mean);
        CHECK(std::abs(dist::gini(y, wt) - oracle) < 1e-10);
    }
}

TEST_CASE("distributional characteristic is exactly one under constant weights") {
    std::mt19937_64 gen(606);
    std::uniform_int_distribution<int> size(1, 50);
    std::uniform_real_distribution<double> u(0.0, 1000.0), w(0.1, 5.0), t(0.01, 10.0);
    for (int k = 0; k < kCases; ++k) {
        const int n = size(gen);
        std::vector<double> x(n), wt(n);
        for (int i = 0; i < n; ++i) {
            x[i] = u(gen) + 1e-3;
            wt[i] = w(gen);
        }
        const double theta = t(gen);
        const std::vector<double> th(n, theta);
        CHECK(dist::distributional_characteristic(th, theta, x, wt) == 1.0);
        // epsilon = 0 gives constant weights through the public path too.
        const auto ww = dist::welfare_weights(x, wt, 0.0);
        CHECK(dist::distributional_characteristic(ww.theta, ww.mean, x, wt) == 1.0);
    }
}

TEST_CASE("recycled revenue is conserved exactly") {
    std::mt19937_64 gen(707);
    std::uniform_int_distribution<int> size(1, 60), hsize(1, 10), bottom(1, 5), grp(0, 4);
    std::uniform_real_distribution<double> w(0.01, 50.0), rev(0.0, 1e7);
    const RecyclingScheme schemes[] = {RecyclingScheme::lump_sum_per_household,
                                                 RecyclingScheme::per_capita,
                                                 RecyclingScheme::targeted_bottom_q};
    for (int k = 0; k < kCases; ++k) {
        const int n = size(gen);
        std::vector<HouseholdRecord> hh(n);
        std::vector<double> wt(n);
        std::vector<std::size_t> g(n);
        for (int i = 0; i < n; ++i) {
            hh[i].size = hsize(gen);
            hh[i].weight = wt[i] = w(gen);
            g[i] = grp(gen);
        }
        g[0] = 0;
        const double revenue = rev(gen);
        const auto scheme = schemes[k % 3];
        const int b = bottom(gen);
        const auto t = scenario::recycle_revenue(revenue, scheme, hh, g, b);
        std::size_t eligible = 0;
        for (int i = 0; i < n; ++i) eligible += scheme != RecyclingScheme::targeted_bottom_q || g[i] < std::size_t(b);
        if (eligible >= 2) {
            CHECK(kernels::weighted_sum(wt, t) == revenue);
        } else {
            // One weighted product cannot hit every double.
            CHECK(std::abs(kernels::weighted_sum(wt, t) - revenue) <= 4.0 * (std::nextafter(revenue, 2 * revenue) - revenue));
        }
        for (double v : t) CHECK(v >= 0.0);
    }
}
