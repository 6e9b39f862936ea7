#include <cmath>
#include <numeric>

#include "doctest.h"
#include "prices/csv.hpp"
#include "prices/error.hpp"
#include "prices/fixtures.hpp"
#include "prices/kernels.hpp"
#include "prices/scenario.hpp"
#include "support.hpp"

using namespace prices;
using namespace prices::scenario;

namespace {

const char* kMinimal =
    "input.households = hh.csv\n"
    "elasticity.exchange_rate = 121.8\n";

std::vector<HouseholdRecord> sized(std::vector<int> sizes, std::vector<double> weights = {}) {
    std::vector<HouseholdRecord> out;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        HouseholdRecord h;
        h.id = "h" + std::to_string(i);
        h.size = sizes[i];
        h.weight = weights.empty() ? 1.0 : weights[i];
        out.push_back(h);
    }
    return out;
}

struct Io2Setup {
    MrioTable mrio = fixtures::io2();
    CategorySet cats = CategorySet::canonical();
    BridgingMatrix bridge = fixtures::bridge(cats);
    FuelTable fuels = fixtures::fuels();
    CarbonInputs inputs() const {
        CarbonInputs in;
        in.mrio = &mrio;
        in.bridge = &bridge;
        in.fuels = &fuels;
        in.direct_fuel = fixtures::direct_fuel_map();
        return in;
    }
};

}  // namespace

TEST_CASE("config parsing") {
    SUBCASE("comments, blanks and defaults") {
        const auto c = parse_config(std::string("# run\n\n") + kMinimal + "scenario.carbon_tax = 0.5 # per tonne\n",
                                    "/data");
        CHECK(c.households == "hh.csv");
        CHECK(c.resolve(c.households) == std::filesystem::path("/data/hh.csv"));
        CHECK(c.carbon_tax == 0.5);
        CHECK(c.groups == 5);
        CHECK(c.equivalence == dist::EquivalenceScale::square_root);
        CHECK(c.execution == kernels::Execution::parallel);
    }
    SUBCASE("direct fuel map and grouping") {
        const auto c = parse_config(std::string(kMinimal) +
                                    "scenario.direct_fuel = motor_fuels:petrol, domestic_energy : lpg\n"
                                    "elasticity.grouping = demographic:urban\n");
        CHECK(c.direct_fuel.at("motor_fuels") == "petrol");
        CHECK(c.direct_fuel.at("domestic_energy") == "lpg");
        CHECK(c.elasticity.grouping.key == demand::GroupingKey::demographic);
        CHECK(c.elasticity.grouping.demographic == "urban");
        CHECK(c.elasticity.engel_scale == demand::EngelScale::household_total);
        const auto pc = parse_config(std::string(kMinimal) + "elasticity.engel_scale = per_capita_month\n");
        CHECK(pc.elasticity.engel_scale == demand::EngelScale::per_capita_month);
        CHECK(pc.hash() != c.hash());
        CHECK_THROWS_AS(parse_config(std::string(kMinimal) + "elasticity.engel_scale = weekly\n"), DataError);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(parse_config(std::string(kMinimal) + "scenario.carbon = 1\n"), DataError);
        CHECK_THROWS_AS(parse_config(std::string(kMinimal) + "run.seed = 1\nrun.seed = 2\n"), DataError);
        CHECK_THROWS_AS(parse_config(std::string(kMinimal) + "run.seed = x\n"), DataError);
        CHECK_THROWS_AS(parse_config(std::string(kMinimal) + "scenario.recycling = maybe\n"), DataError);
        CHECK_THROWS_AS(parse_config(std::string(kMinimal) + "just words\n"), DataError);
    }
    SUBCASE("validation") {
        testing::TempDir dir("cfg");
        testing::write_file(dir / "hh.csv", "id,weight,size\n");
        auto ok = parse_config(kMinimal, dir.path());
        CHECK_NOTHROW(ok.validate());
        auto c = parse_config("input.households = hh.csv\n", dir.path());
        CHECK_THROWS_AS(c.validate(), DataError);  // exchange rate missing
        c = parse_config(std::string(kMinimal) + "scenario.carbon_tax = 1\n", dir.path());
        CHECK_THROWS_AS(c.validate(), DataError);  // no MRIO
        c = parse_config(std::string(kMinimal) + "input.prices = missing.csv\n", dir.path());
        CHECK_THROWS_AS(c.validate(), DataError);
        c = parse_config(std::string(kMinimal) + "scenario.passthrough = 1.5\n", dir.path());
        CHECK_THROWS_AS(c.validate(), DataError);
    }
}

TEST_CASE("config hash") {
    const auto a = parse_config(std::string(kMinimal) + "run.seed = 7\nrun.output = a\n");
    const auto b = parse_config("# same run\nrun.output = elsewhere\nrun.seed=7\n" + std::string(kMinimal));
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    const auto c = parse_config(std::string(kMinimal) + "run.seed = 8\n");
    CHECK(a.hash() != c.hash());
    CHECK(a.effective().count("run.output") == 0);
    CHECK(a.effective().at("run.seed") == "7");
}

TEST_CASE("consumer prices with indirect taxes") {
    IndirectTax t;
    t.base_price = 100.0;
    t.excise = 10.0;
    t.vat = 0.17;
    // Excise dilutes the producer change; ad valorem rates do not.
    CHECK(consumer_price_relative(0.1, t) == doctest::Approx(0.0909).epsilon(1e-4));
    CHECK(consumer_price_relative(0.1, IndirectTax{}) == 0.1);

    IndirectTax post = t;
    post.vat = 0.18;
    CHECK(consumer_price_relative(0.0, t, post) == doctest::Approx(1.18 / 1.17 - 1.0).epsilon(1e-14));
    CHECK(consumer_price_relative(0.1, t, t) == doctest::Approx(consumer_price_relative(0.1, t)).epsilon(1e-14));
    t.vat = -0.1;
    CHECK_THROWS_AS(consumer_price_relative(0.1, t), DataError);
}

TEST_CASE("carbon tax prices on the two-sector economy") {
    Io2Setup s;
    const auto in = s.inputs();
    const auto p = carbon_prices(10.0, in, s.cats);
    CHECK(p.producer(0) == doctest::Approx(3.5).epsilon(1e-12));
    CHECK(p.producer(1) == doctest::Approx(4.5).epsilon(1e-12));
    const auto food = s.cats.require("food");
    const auto fuel = s.cats.require("motor_fuels");
    const auto rent = s.cats.require("rents");
    CHECK(p.bridged[food] == doctest::Approx(3.5));
    CHECK(p.bridged[rent] == doctest::Approx(4.0));
    CHECK(p.direct[fuel] == doctest::Approx(10.0 * 2.31 / 1000.0 / 87.3).epsilon(1e-12));
    CHECK(p.direct[food] == 0.0);
    CHECK(p.relatives()[fuel] == doctest::Approx(4.5 + p.direct[fuel]));

    SUBCASE("doubling the rate doubles relatives and revenue") {
        const auto hh = fixtures::households({50, 3});
        const auto one = carbon_tax_scenario(0.1, in, hh, s.cats);
        const auto two = carbon_tax_scenario(0.2, in, hh, s.cats);
        for (std::size_t c = 0; c < s.cats.size(); ++c)
            CHECK(two.prices.relatives()[c] == doctest::Approx(2.0 * one.prices.relatives()[c]).epsilon(1e-12));
        CHECK(two.revenue == doctest::Approx(2.0 * one.revenue).epsilon(1e-12));
        double direct = 0.0;
        for (std::size_t h = 0; h < hh.size(); ++h) direct += hh[h].weight * one.household_revenue[h];
        CHECK(one.revenue == doctest::Approx(direct).epsilon(1e-12));
    }
    SUBCASE("pass-through scales the indirect part only") {
        auto half = in;
        half.passthrough = 0.5;
        const auto q = carbon_prices(10.0, half, s.cats);
        CHECK(q.bridged[food] == doctest::Approx(1.75));
        CHECK(q.direct[fuel] == p.direct[fuel]);
    }
    SUBCASE("imported sectors only shock prices under border adjustment") {
        Io2Setup m;
        m.mrio.origin[1] = Origin::imported;
        auto mi = m.inputs();
        const auto off = carbon_prices(10.0, mi, m.cats);
        mi.border_adjustment = true;
        const auto on = carbon_prices(10.0, mi, m.cats);
        CHECK(off.producer(0) == doctest::Approx(10.0 * 0.1 * 1.5));
        CHECK(on.producer(0) == doctest::Approx(3.5));
    }
    SUBCASE("an extra sector shock adds linearly") {
        auto ex = in;
        ex.extra_shock = Eigen::Vector2d(0.1, 0.0);
        const auto q = carbon_prices(10.0, ex, s.cats);
        CHECK(q.producer(0) == doctest::Approx(3.5 + 0.1 * 1.5).epsilon(1e-12));
        CHECK(q.producer(1) == doctest::Approx(4.5 + 0.1 * 0.5).epsilon(1e-12));
    }
}

TEST_CASE("scenario composition") {
    const std::vector<double> a = {0.1, 0.0, -0.2, 0.5}, b = {0.05, 0.3, 0.1, 0.0};
    const auto c = compose_relatives(a, b);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::abs((1.0 + c[i]) - (1.0 + a[i]) * (1.0 + b[i])) < 1e-12);
    const std::vector<double> zero(4, 0.0);
    CHECK(compose_relatives(a, zero) == a);
    // Applying the composite equals applying the two changes in sequence.
    const auto ab = compose_relatives(a, b), ba = compose_relatives(b, a);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(ab[i] - ba[i]) < 1e-12);
}

TEST_CASE("revenue recycling") {
    SUBCASE("lump sum per household") {
        const auto hh = sized({1, 3});
        CHECK(recycle_revenue(10.0, RecyclingScheme::lump_sum_per_household, hh) == std::vector<double>{5.0, 5.0});
    }
    SUBCASE("per capita") {
        const auto hh = sized({1, 3});
        CHECK(recycle_revenue(8.0, RecyclingScheme::per_capita, hh) == std::vector<double>{2.0, 6.0});
    }
    SUBCASE("targeted at the bottom groups") {
        const auto hh = sized({1, 1, 1, 1});
        const std::vector<std::size_t> g = {0, 1, 2, 1};
        const auto t = recycle_revenue(9.0, RecyclingScheme::targeted_bottom_q, hh, g, 2);
        CHECK(t == std::vector<double>{3.0, 3.0, 0.0, 3.0});
    }
    SUBCASE("conservation is exact with awkward weights") {
        const auto hh = sized({1, 2, 5, 3, 7}, {1.1, 0.3, 2.7, 13.0 / 7.0, 0.9});
        const double revenue = 1234.5678;
        for (auto scheme : {RecyclingScheme::lump_sum_per_household, RecyclingScheme::per_capita}) {
            const auto t = recycle_revenue(revenue, scheme, hh);
            std::vector<double> w;
            for (const auto& h : hh) w.push_back(h.weight);
            CHECK(kernels::weighted_sum(w, t) == revenue);
        }
    }
    SUBCASE("none and empty targets") {
        const auto hh = sized({1, 1});
        CHECK(recycle_revenue(5.0, RecyclingScheme::none, hh) == std::vector<double>{0.0, 0.0});
        const std::vector<std::size_t> g = {3, 4};
        CHECK_THROWS_AS(recycle_revenue(5.0, RecyclingScheme::targeted_bottom_q, hh, g, 1), DataError);
    }
}

TEST_CASE("pipeline on the fixture bundle") {
    testing::TempDir dir("bundle");
    fixtures::write_bundle(dir.path());

    SUBCASE("inflation episode") {
        auto cfg = load_config(dir / "inflation.cfg");
        const auto r = run_scenario(cfg);
        REQUIRE(r.households.size() == 500);
        CHECK(r.revenue == 0.0);
        // Aggregate inflation: ratio of weighted sums equals the share-weighted rates.
        double burden = 0.0, total = 0.0;
        for (const auto& h : r.households) {
            burden += h.weight * h.burden;
            total += h.weight * h.total;
        }
        CHECK(burden / total == doctest::Approx(0.414231).epsilon(1e-5));
        const auto t2 = csv::parse(r.tables.at("t2_inflation_drivers.csv"));
        CHECK(t2.rows.back()[0] == "Total");
        CHECK(std::stod(t2.rows.back()[3]) == doctest::Approx(burden / total).epsilon(1e-5));
        for (const auto& h : r.households) {
            CHECK(h.cv_gross > 0.0);
            CHECK(h.ye_post < h.ye_pre);
            CHECK(h.cv_net == h.cv_gross);
        }

        SUBCASE("tables regenerate from the household file") {
            const auto written = emit_reports(r, dir / "out");
            CHECK(std::find(written.begin(), written.end(), "manifest.json") != written.end());
            const auto again = report_from_results(dir / "out" / "households.csv", cfg);
            CHECK(again == r.tables);
        }
        SUBCASE("serial execution gives identical results") {
            cfg.execution = kernels::Execution::serial;
            const auto s = run_scenario(cfg);
            CHECK(s.tables == r.tables);
        }
    }
    SUBCASE("carbon tax with per-capita recycling") {
        const auto r = run_scenario(load_config(dir / "carbon.cfg"));
        CHECK(r.revenue > 0.0);
        std::vector<double> w, t;
        for (const auto& h : r.households) {
            w.push_back(h.weight);
            t.push_back(h.transfer);
        }
        CHECK(kernels::weighted_sum(w, t) == r.revenue);
        for (const auto& h : r.households) {
            CHECK(h.transfer == doctest::Approx(r.households[0].transfer / r.households[0].size * h.size));
            CHECK(h.cv_net == doctest::Approx(h.cv_gross - h.transfer));
        }
        REQUIRE(r.carbon);
        CHECK(r.carbon->bridged[0] == doctest::Approx(0.035));
    }
    SUBCASE("a null scenario changes nothing") {
        auto cfg = parse_config(
            "input.households = households.csv\n"
            "elasticity.exchange_rate = 121.8\n",
            dir.path());
        const auto r = run_scenario(cfg);
        for (const auto& h : r.households) {
            CHECK(h.inflation == 0.0);
            CHECK(h.cv_gross == 0.0);
            CHECK(h.ye_post == h.ye_pre);
            CHECK(h.transfer == 0.0);
        }
    }
    SUBCASE("bad input exits through DataError") {
        testing::write_file(dir / "households.csv", "id,weight,size\nx,1,1\n");
        CHECK_THROWS_AS(run_scenario(load_config(dir / "inflation.cfg")), DataError);
    }
}

TEST_CASE("household results round trip") {
    testing::TempDir dir("results");
    fixtures::write_bundle(dir.path());
    const auto r = run_scenario(load_config(dir / "inflation.cfg"));
    const auto text = format_household_results(r.households, r.categories, r.groups);
    const auto back = parse_household_results(text, r.categories, r.groups);
    REQUIRE(back.size() == r.households.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].id == r.households[i].id);
        CHECK(back[i].cv_gross == r.households[i].cv_gross);
        CHECK(back[i].ye_post_eq == r.households[i].ye_post_eq);
        CHECK(back[i].expenditure == r.households[i].expenditure);
        CHECK(back[i].contribution == r.households[i].contribution);
    }
    CHECK(format_household_results(back, r.categories, r.groups) == text);
}
