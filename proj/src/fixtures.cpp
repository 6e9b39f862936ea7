#include "prices/fixtures.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "prices/csv.hpp"
#include "prices/error.hpp"

namespace prices::fixtures {

namespace {

struct CategoryProcess {
    const char* id;
    double a, b;                        // participation logit; a = +inf always, -inf never
    double alpha, beta, gamma, sigma;   // conditional share
};

constexpr double kAlways = 1e9;
constexpr double kNever = -1e9;

// Canonical category order.
constexpr CategoryProcess kProcess[] = {
    {"food", kAlways, 0.0, 0.42, -0.07, -0.01, 0.04},
    {"alcohol", kNever, 0.0, 0.0, 0.0, 0.0, 0.0},
    {"tobacco", 0.2, -0.3, 0.03, -0.01, 0.0, 0.01},
    {"clothing", 2.5, 0.6, 0.07, 0.0, 0.0, 0.015},
    {"domestic_energy", 2.2, 0.2, 0.006, -0.002, 0.0, 0.002},
    {"electricity", 1.6, 0.9, 0.04, 0.0, 0.0, 0.01},
    {"rents", 0.3, 0.8, 0.08, 0.02, 0.005, 0.02},
    {"household_services", -0.6, 1.2, 0.03, 0.015, 0.0, 0.01},
    {"health", 1.0, 0.5, 0.05, 0.005, 0.0, 0.015},
    {"private_transport", -1.2, 1.1, 0.04, 0.02, 0.0, 0.015},
    {"public_transport", 0.4, -0.2, 0.02, -0.005, 0.0, 0.006},
    {"communication", 1.3, 0.9, 0.03, 0.005, 0.0, 0.008},
    {"recreation", 0.1, 0.8, 0.015, 0.005, 0.0, 0.005},
    {"education", 0.0, 0.9, 0.05, 0.02, 0.0, 0.015},
    {"restaurants", -0.4, 0.9, 0.03, 0.01, 0.0, 0.01},
    {"other", 2.0, 0.7, 0.08, 0.01, 0.0, 0.02},
    {"childcare", kNever, 0.0, 0.0, 0.0, 0.0, 0.0},
    {"motor_fuels", -0.1, 1.0, 0.05, 0.01, 0.0, 0.015},
    {"durables", -1.0, 1.0, 0.04, 0.02, 0.005, 0.015},
};

constexpr double kCentre = 9.8;

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("data-model", "cannot write '" + path.string() + "'");
    out << text;
}

}  // namespace

MrioTable io2() {
    MrioTable t;
    t.sectors = {"s1", "s2"};
    t.flows.resize(2, 2);
    t.flows << 20, 30, 40, 10;
    t.final_demand = Eigen::Vector2d(50, 50);
    t.output = Eigen::Vector2d(100, 100);
    t.emissions = Eigen::Vector2d(10, 30);
    t.origin = {Origin::domestic, Origin::domestic};
    return t;
}

LesFixture les() { return {{1.0, 1.0, 1.0}, {50.0, 30.0, 20.0}, {0.8, 1.0, 1.5}, 100.0, -1.5}; }

std::vector<double> summary_shares() { return {0.417, 0.047, 0.007, 0.529}; }
std::vector<double> summary_rates() { return {0.4289, 0.7927, 0.6365, 0.3661}; }

std::vector<double> summary_relatives(const CategorySet& categories) {
    const auto groups = ExpenditureGroups::summary(categories);
    const auto rates = summary_rates();
    std::vector<double> out(categories.size());
    for (std::size_t c = 0; c < categories.size(); ++c) out[c] = rates[groups.group_of[c]];
    return out;
}

std::vector<HouseholdRecord> households(HouseholdFixtureOptions options) {
    const CategorySet cats = CategorySet::canonical();
    const std::size_t n_cat = cats.size();
    std::mt19937_64 gen(options.seed);
    std::binomial_distribution<int> size_dist(9, 0.45);
    std::bernoulli_distribution urban_dist(0.4);
    std::uniform_int_distribution<int> age_dist(22, 75);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::vector<HouseholdRecord> out;
    for (std::size_t h = 0; h < options.households; ++h) {
        HouseholdRecord r;
        r.id = "hh" + std::to_string(h + 1);
        r.weight = 1.0;
        r.size = 1 + size_dist(gen);
        const double urban = urban_dist(gen) ? 1.0 : 0.0;
        r.demographics["urban"] = urban;
        r.demographics["head_age"] = age_dist(gen);
        const double ln_y = 9.5 + 0.08 * r.size + 0.25 * urban + 0.55 * std_normal(gen);
        const double ln_x = 0.6 + 0.92 * ln_y + 0.03 * r.size - 0.05 * urban + 0.15 * std_normal(gen);
        r.disposable_income = std::round(std::exp(ln_y) * 100.0) / 100.0;

        const double t = ln_x - kCentre;
        std::vector<double> share(n_cat, 0.0);
        double sum = 0.0;
        for (std::size_t c = 0; c < n_cat; ++c) {
            const auto& p = kProcess[c];
            const double u = unif(gen);
            const double e = std_normal(gen);
            const bool buys = p.a >= kAlways ? true : (p.a <= kNever ? false : u < 1.0 / (1.0 + std::exp(-(p.a + p.b * t))));
            if (!buys) continue;
            share[c] = std::max(0.0, p.alpha + p.beta * t + p.gamma * t * t + p.sigma * e);
            sum += share[c];
        }
        const double x = std::exp(ln_x);
        r.expenditure.resize(n_cat);
        for (std::size_t c = 0; c < n_cat; ++c) r.expenditure[c] = x * share[c] / sum;
        out.push_back(std::move(r));
    }

    // Rescale summary groups onto the target aggregate shares.
    const auto groups = ExpenditureGroups::summary(cats);
    const auto target = summary_shares();
    std::vector<double> group_total(groups.size(), 0.0);
    double total = 0.0;
    for (const auto& r : out)
        for (std::size_t c = 0; c < n_cat; ++c) {
            group_total[groups.group_of[c]] += r.weight * r.expenditure[c];
            total += r.weight * r.expenditure[c];
        }
    for (auto& r : out)
        for (std::size_t c = 0; c < n_cat; ++c) {
            const std::size_t g = groups.group_of[c];
            const double v = r.expenditure[c] * target[g] * total / group_total[g];
            r.expenditure[c] = std::round(v * 100.0) / 100.0;
        }
    return out;
}

BridgingMatrix bridge(const CategorySet& categories) {
    BridgingMatrix b;
    b.products = {"s1", "s2"};
    b.shares.resize(static_cast<Eigen::Index>(categories.size()), 2);
    for (std::size_t c = 0; c < categories.size(); ++c) {
        const auto& id = categories[c].id;
        b.categories.push_back(id);
        const auto i = static_cast<Eigen::Index>(c);
        if (id == "food") b.shares.row(i) << 1.0, 0.0;
        else if (id == "motor_fuels" || id == "domestic_energy" || id == "electricity") b.shares.row(i) << 0.0, 1.0;
        else b.shares.row(i) << 0.5, 0.5;
    }
    return b;
}

FuelTable fuels() {
    return {{{"diesel", 73.4, 2.68},
             {"petrol", 87.3, 2.31},
             {"electricity", 10.4, 0.42},
             {"kerosene", 83.6, 2.52},
             {"lpg", 50.2, 1.51},
             {"coal", 11.3, 2.42}}};
}

std::map<std::string, std::string> direct_fuel_map() {
    return {{"motor_fuels", "petrol"}, {"domestic_energy", "lpg"}};
}

void write_bundle(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const CategorySet cats = CategorySet::canonical();
    const auto hh = households();
    write_household_survey(dir / "households.csv", hh, cats);

    csv::Writer income({"id", "weight", "size", "inc", "demo_head_age", "demo_urban"});
    for (const auto& h : hh)
        income.add_row({h.id, csv::format_exact(h.weight), std::to_string(h.size), csv::format_exact(*h.disposable_income),
                        csv::format_exact(h.demographics.at("head_age")), csv::format_exact(h.demographics.at("urban"))});
    income.write(dir / "income.csv");

    write_mrio(io2(), dir);
    write_bridge(bridge(cats), dir / "bridge.csv");
    write_fuels(fuels(), dir / "fuels.csv");

    csv::Writer prices({"category", "pi"});
    const auto rel = summary_relatives(cats);
    for (std::size_t c = 0; c < cats.size(); ++c) prices.add_row({cats[c].id, csv::format_exact(rel[c])});
    prices.write(dir / "prices.csv");

    const std::string common =
        "input.households = households.csv\n"
        "input.income = income.csv\n"
        "input.mrio = .\n"
        "input.bridge = bridge.csv\n"
        "input.fuels = fuels.csv\n"
        "\n"
        "elasticity.exchange_rate = 121.8\n"
        "elasticity.grouping = size_band\n"
        "\n"
        "distribution.groups = 5\n"
        "distribution.equivalence = sqrt\n"
        "distribution.welfare_epsilon = 1\n"
        "distribution.atkinson_epsilon = 2\n"
        "\n"
        "run.seed = 42\n";
    write_text(dir / "inflation.cfg", "# Observed 2018 price changes, no carbon tax\n" + common +
                                          "\ninput.prices = prices.csv\n"
                                          "scenario.direct_fuel = motor_fuels:petrol, domestic_energy:lpg\n"
                                          "run.output = out_inflation\n");
    write_text(dir / "carbon.cfg", "# Carbon tax with per-capita recycling\n" + common +
                                       "\nscenario.carbon_tax = 0.1\n"
                                       "scenario.recycling = per_capita\n"
                                       "scenario.direct_fuel = motor_fuels:petrol, domestic_energy:lpg\n"
                                       "run.output = out_carbon\n");
}

}  // namespace prices::fixtures
