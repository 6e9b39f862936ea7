#include "prices/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "prices/csv.hpp"
#include "prices/error.hpp"
#include "prices/imputation.hpp"
#include "prices/log.hpp"

namespace prices::scenario {

namespace {

constexpr const char* kModule = "scenario-cli";

[[noreturn]] void fail(const std::string& msg) { throw DataError(kModule, msg); }

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end || !std::isfinite(out)) fail("config: '" + key + "' expects a number, got '" + v + "'");
    return out;
}

long long parse_integer(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) fail("config: '" + key + "' expects an integer, got '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail("config: '" + key + "' expects true or false, got '" + v + "'");
}

std::string slug(const std::string& name) {
    std::string out;
    for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        else if (!out.empty() && out.back() != '_') out += '_';
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out;
}

std::string grouping_string(const demand::GroupingOptions& g) {
    switch (g.key) {
        case demand::GroupingKey::none: return "none";
        case demand::GroupingKey::size_band: return "size_band";
        case demand::GroupingKey::demographic: return "demographic:" + g.demographic;
    }
    return "none";
}

std::string path_string(const std::filesystem::path& p) { return p.generic_string(); }

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

std::string to_string(RecyclingScheme scheme) {
    switch (scheme) {
        case RecyclingScheme::none: return "none";
        case RecyclingScheme::lump_sum_per_household: return "lump_sum_per_household";
        case RecyclingScheme::per_capita: return "per_capita";
        case RecyclingScheme::targeted_bottom_q: return "targeted_bottom_q";
    }
    return "none";
}

RecyclingScheme parse_recycling(const std::string& tag) {
    if (tag == "none") return RecyclingScheme::none;
    if (tag == "lump_sum_per_household") return RecyclingScheme::lump_sum_per_household;
    if (tag == "per_capita") return RecyclingScheme::per_capita;
    if (tag == "targeted_bottom_q") return RecyclingScheme::targeted_bottom_q;
    fail("unknown recycling scheme '" + tag + "'");
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir, const std::string& source) {
    RunConfig c;
    c.base_dir = base_dir;
    std::set<std::string> seen;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        const std::string where = source + ":" + std::to_string(line_no);
        if (eq == std::string::npos) fail(where + ": expected 'key = value'");
        const std::string key = trim(std::string_view(t).substr(0, eq));
        const std::string v = trim(std::string_view(t).substr(eq + 1));
        if (!seen.insert(key).second) fail(where + ": key '" + key + "' given twice");

        if (key == "input.households") c.households = v;
        else if (key == "input.income") c.income = v;
        else if (key == "input.mrio") c.mrio = v;
        else if (key == "input.bridge") c.bridge = v;
        else if (key == "input.fuels") c.fuels = v;
        else if (key == "input.prices") c.prices = v;
        else if (key == "input.taxes") c.taxes = v;
        else if (key == "input.taxes_post") c.taxes_post = v;
        else if (key == "input.sector_shock") c.sector_shock = v;
        else if (key == "scenario.carbon_tax") c.carbon_tax = parse_double(key, v);
        else if (key == "scenario.passthrough") c.passthrough = parse_double(key, v);
        else if (key == "scenario.border_adjustment") c.border_adjustment = parse_bool(key, v);
        else if (key == "scenario.recycling") c.recycling = parse_recycling(v);
        else if (key == "scenario.targeted_groups") c.targeted_groups = static_cast<int>(parse_integer(key, v));
        else if (key == "scenario.direct_fuel") {
            std::stringstream items(v);
            std::string item;
            while (std::getline(items, item, ',')) {
                item = trim(item);
                if (item.empty()) continue;
                const auto colon = item.find(':');
                if (colon == std::string::npos) fail(where + ": direct_fuel entries are category:fuel");
                c.direct_fuel[trim(item.substr(0, colon))] = trim(item.substr(colon + 1));
            }
        } else if (key == "elasticity.exchange_rate") c.elasticity.exchange_rate = parse_double(key, v);
        else if (key == "elasticity.frisch_phi") c.elasticity.frisch.phi = parse_double(key, v);
        else if (key == "elasticity.frisch_alpha") c.elasticity.frisch.alpha = parse_double(key, v);
        else if (key == "elasticity.frisch_offset") c.elasticity.frisch.offset = parse_double(key, v);
        else if (key == "elasticity.frisch_cap") c.elasticity.frisch.cap = parse_double(key, v);
        else if (key == "elasticity.engel_scale") {
            if (v == "household_total") c.elasticity.engel_scale = demand::EngelScale::household_total;
            else if (v == "per_capita_month") c.elasticity.engel_scale = demand::EngelScale::per_capita_month;
            else fail(where + ": engel_scale must be household_total or per_capita_month");
        } else if (key == "elasticity.period_months") c.elasticity.period_months = parse_double(key, v);
        else if (key == "elasticity.min_group_size")
            c.elasticity.min_group_size = static_cast<std::size_t>(std::max(0LL, parse_integer(key, v)));
        else if (key == "elasticity.grouping") {
            if (v == "none") c.elasticity.grouping.key = demand::GroupingKey::none;
            else if (v == "size_band") c.elasticity.grouping.key = demand::GroupingKey::size_band;
            else if (v.rfind("demographic:", 0) == 0 && v.size() > 12) {
                c.elasticity.grouping.key = demand::GroupingKey::demographic;
                c.elasticity.grouping.demographic = v.substr(12);
            } else fail(where + ": grouping must be none, size_band or demographic:<name>");
        } else if (key == "distribution.groups") {
            const auto k = parse_integer(key, v);
            if (k < 2) fail(where + ": distribution.groups must be >= 2");
            c.groups = static_cast<std::size_t>(k);
        } else if (key == "distribution.equivalence") c.equivalence = dist::parse_scale(v);
        else if (key == "distribution.welfare_epsilon") c.welfare_epsilon = parse_double(key, v);
        else if (key == "distribution.atkinson_epsilon") c.atkinson_epsilon = parse_double(key, v);
        else if (key == "imputation.link") {
            if (v == "logit") c.link = regression::Link::logit;
            else if (v == "probit") c.link = regression::Link::probit;
            else fail(where + ": link must be logit or probit");
        } else if (key == "imputation.min_income") c.min_income = parse_double(key, v);
        else if (key == "run.seed") {
            const auto s = parse_integer(key, v);
            if (s < 0) fail(where + ": seed must be >= 0");
            c.seed = static_cast<std::uint64_t>(s);
        } else if (key == "run.impute") c.impute = parse_bool(key, v);
        else if (key == "run.output") c.output = v;
        else if (key == "run.execution") {
            if (v == "parallel") c.execution = kernels::Execution::parallel;
            else if (v == "serial") c.execution = kernels::Execution::serial;
            else fail(where + ": execution must be parallel or serial");
        } else fail(where + ": unknown key '" + key + "'");
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open config '" + path.string() + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto dir = path.parent_path();
    if (dir.empty()) dir = ".";
    return parse_config(text, dir, path.string());
}

std::filesystem::path RunConfig::resolve(const std::filesystem::path& p) const {
    if (p.empty() || p.is_absolute()) return p;
    return base_dir / p;
}

std::map<std::string, std::string> RunConfig::effective() const {
    std::map<std::string, std::string> m;
    m["input.households"] = path_string(households);
    m["input.income"] = path_string(income);
    m["input.mrio"] = path_string(mrio);
    m["input.bridge"] = path_string(bridge);
    m["input.fuels"] = path_string(fuels);
    m["input.prices"] = path_string(prices);
    m["input.taxes"] = path_string(taxes);
    m["input.taxes_post"] = path_string(taxes_post);
    m["input.sector_shock"] = path_string(sector_shock);
    m["scenario.carbon_tax"] = csv::format_exact(carbon_tax);
    m["scenario.passthrough"] = csv::format_exact(passthrough);
    m["scenario.border_adjustment"] = border_adjustment ? "true" : "false";
    m["scenario.recycling"] = to_string(recycling);
    m["scenario.targeted_groups"] = std::to_string(targeted_groups);
    std::string df;
    for (const auto& [k, v] : direct_fuel) df += (df.empty() ? "" : ",") + k + ":" + v;
    m["scenario.direct_fuel"] = df;
    m["elasticity.exchange_rate"] = csv::format_exact(elasticity.exchange_rate);
    m["elasticity.frisch_phi"] = csv::format_exact(elasticity.frisch.phi);
    m["elasticity.frisch_alpha"] = csv::format_exact(elasticity.frisch.alpha);
    m["elasticity.frisch_offset"] = csv::format_exact(elasticity.frisch.offset);
    m["elasticity.frisch_cap"] = csv::format_exact(elasticity.frisch.cap);
    m["elasticity.engel_scale"] =
        elasticity.engel_scale == demand::EngelScale::household_total ? "household_total" : "per_capita_month";
    m["elasticity.period_months"] = csv::format_exact(elasticity.period_months);
    m["elasticity.min_group_size"] = std::to_string(elasticity.min_group_size);
    m["elasticity.grouping"] = grouping_string(elasticity.grouping);
    m["distribution.groups"] = std::to_string(groups);
    m["distribution.equivalence"] = dist::to_string(equivalence);
    m["distribution.welfare_epsilon"] = csv::format_exact(welfare_epsilon);
    m["distribution.atkinson_epsilon"] = csv::format_exact(atkinson_epsilon);
    m["imputation.link"] = link == regression::Link::logit ? "logit" : "probit";
    m["imputation.min_income"] = csv::format_exact(min_income);
    m["run.seed"] = std::to_string(seed);
    m["run.impute"] = impute ? "true" : "false";
    m["run.execution"] = execution == kernels::Execution::parallel ? "parallel" : "serial";
    return m;
}

std::string RunConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [k, v] : effective()) {
        for (char ch : k + "=" + v + "\n") {
            h ^= static_cast<unsigned char>(ch);
            h *= 0x100000001b3ULL;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void RunConfig::validate() const {
    auto need_file = [&](const std::filesystem::path& p, const char* key) {
        if (p.empty()) return;
        if (!std::filesystem::exists(resolve(p))) fail("config: " + std::string(key) + " '" + resolve(p).string() + "' does not exist");
    };
    if (households.empty()) fail("config: input.households is required");
    need_file(households, "input.households");
    need_file(income, "input.income");
    need_file(mrio, "input.mrio");
    need_file(bridge, "input.bridge");
    need_file(fuels, "input.fuels");
    need_file(prices, "input.prices");
    need_file(taxes, "input.taxes");
    need_file(taxes_post, "input.taxes_post");
    need_file(sector_shock, "input.sector_shock");
    if (impute && income.empty()) fail("config: run.impute needs input.income");
    if (!(elasticity.exchange_rate > 0.0)) fail("config: elasticity.exchange_rate is required and must be > 0");
    if (!(elasticity.period_months > 0.0)) fail("config: elasticity.period_months must be > 0");
    if (elasticity.frisch.cap >= 0.0) fail("config: elasticity.frisch_cap must be negative");
    if (carbon_tax < 0.0) fail("config: scenario.carbon_tax must be >= 0");
    if (passthrough < 0.0 || passthrough > 1.0) fail("config: scenario.passthrough must lie in [0, 1]");
    if ((carbon_tax > 0.0 || !sector_shock.empty()) && (mrio.empty() || bridge.empty()))
        fail("config: a carbon tax or sector shock needs input.mrio and input.bridge");
    if (!direct_fuel.empty() && fuels.empty()) fail("config: scenario.direct_fuel needs input.fuels");
    if (!taxes_post.empty() && taxes.empty()) fail("config: input.taxes_post needs input.taxes");
    if (groups < 2) fail("config: distribution.groups must be >= 2");
    if (!(welfare_epsilon >= 0.0) || !(atkinson_epsilon >= 0.0)) fail("config: inequality aversion must be >= 0");
    if (recycling == RecyclingScheme::targeted_bottom_q &&
        (targeted_groups < 1 || static_cast<std::size_t>(targeted_groups) > groups))
        fail("config: scenario.targeted_groups must lie in [1, distribution.groups]");
    if (!(min_income > 0.0)) fail("config: imputation.min_income must be > 0");
}

// ---------------------------------------------------------------------------
// Price formation

double consumer_price_relative(double producer_relative, const IndirectTax& tax) {
    if (tax.vat < 0.0 || tax.advalorem < 0.0 || tax.excise < 0.0 || !(tax.base_price > 0.0))
        fail("tax rates must be >= 0 and the base price > 0");
    // ((P(1+r) + e)(1+a)(1+v)) / ((P + e)(1+a)(1+v)) - 1 = r P / (P + e)
    return producer_relative * (tax.base_price / (tax.base_price + tax.excise));
}

double consumer_price_relative(double producer_relative, const IndirectTax& before, const IndirectTax& after) {
    consumer_price_relative(0.0, before);
    consumer_price_relative(0.0, after);
    const double p = before.base_price;
    const double post = (p * (1.0 + producer_relative) + after.excise) * (1.0 + after.advalorem) * (1.0 + after.vat);
    const double pre = (p + before.excise) * (1.0 + before.advalorem) * (1.0 + before.vat);
    return post / pre - 1.0;
}

std::vector<double> CarbonPrices::relatives() const {
    std::vector<double> out(indirect.size());
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = indirect[c] + direct[c];
    return out;
}

CarbonPrices carbon_prices(double rate, const CarbonInputs& in, const CategorySet& categories,
                           kernels::Execution exec) {
    if (rate < 0.0) fail("carbon tax must be >= 0");
    if (!in.mrio || !in.bridge) fail("carbon tax scenario needs an MRIO table and a bridging matrix");
    const MrioTable& t = *in.mrio;
    const BridgingMatrix& b = *in.bridge;
    if (b.products != t.sectors) fail("bridging matrix products do not match the MRIO sectors");
    if (b.shares.rows() != static_cast<Eigen::Index>(categories.size()))
        fail("bridging matrix rows do not match the categories");
    if (!in.taxes.empty() && in.taxes.size() != categories.size()) fail("tax schedule does not cover the categories");

    const auto l = io::leontief_inverse(io::technology_matrix(t), io::LeontiefMethod::direct, {}, exec);
    const auto s = io::sector_intensity(t);
    CarbonPrices out;
    out.sector_shock = rate * s.domestic;
    if (in.border_adjustment) out.sector_shock += rate * s.imported;
    if (in.extra_shock) {
        if (in.extra_shock->size() != out.sector_shock.size()) fail("sector shock does not match the MRIO sectors");
        out.sector_shock += *in.extra_shock;
    }
    out.producer = io::cost_passthrough(l, out.sector_shock, in.passthrough, exec);
    const Eigen::VectorXd bridged = io::bridge_to_categories(b, out.producer);

    const std::size_t n = categories.size();
    out.bridged.assign(bridged.data(), bridged.data() + bridged.size());
    out.indirect.resize(n);
    out.direct.assign(n, 0.0);
    out.producer_share.resize(n);
    for (std::size_t c = 0; c < n; ++c) {
        const IndirectTax tax = in.taxes.empty() ? IndirectTax{} : in.taxes[c];
        out.indirect[c] = consumer_price_relative(out.bridged[c], tax);
        out.producer_share[c] =
            tax.base_price / ((tax.base_price + tax.excise) * (1.0 + tax.advalorem) * (1.0 + tax.vat));
    }
    for (const auto& [category, fuel_name] : in.direct_fuel) {
        const std::size_t c = categories.require(category);
        if (!in.fuels) fail("direct fuel use needs a fuel table");
        const Fuel* f = in.fuels->find(fuel_name);
        if (!f) fail("direct fuel '" + fuel_name + "' is not in the fuel table");
        out.direct[c] = rate * f->kgco2_per_unit / 1000.0 / f->price;
    }
    return out;
}

CarbonScenario carbon_tax_scenario(double rate, const CarbonInputs& in, std::span<const HouseholdRecord> households,
                                   const CategorySet& categories, kernels::Execution exec) {
    CarbonScenario out;
    out.prices = carbon_prices(rate, in, categories, exec);
    out.household_revenue.resize(households.size());
    const std::size_t n = categories.size();
    std::vector<double> per_currency(n);
    for (std::size_t c = 0; c < n; ++c)
        per_currency[c] = out.prices.producer_share[c] * out.prices.bridged[c] + out.prices.direct[c];
    kernels::for_each_index(households.size(), exec, [&](std::size_t h) {
        out.household_revenue[h] = kernels::weighted_sum(households[h].expenditure, per_currency);
    });
    std::vector<double> w(households.size());
    for (std::size_t h = 0; h < households.size(); ++h) w[h] = households[h].weight;
    out.revenue = kernels::weighted_sum(w, out.household_revenue);
    return out;
}

std::vector<double> compose_relatives(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) fail("price relative vectors differ in length");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i] + a[i] * b[i];
    return out;
}

std::vector<double> recycle_revenue(double revenue, RecyclingScheme scheme,
                                    std::span<const HouseholdRecord> households, std::span<const std::size_t> group,
                                    int bottom) {
    if (!(revenue >= 0.0)) fail("revenue must be >= 0");
    const std::size_t n = households.size();
    std::vector<double> t(n, 0.0);
    if (scheme == RecyclingScheme::none || revenue == 0.0) return t;

    std::vector<double> w(n), basis(n, 0.0);
    for (std::size_t h = 0; h < n; ++h) {
        w[h] = households[h].weight;
        switch (scheme) {
            case RecyclingScheme::lump_sum_per_household: basis[h] = 1.0; break;
            case RecyclingScheme::per_capita: basis[h] = households[h].size; break;
            case RecyclingScheme::targeted_bottom_q:
                if (group.size() != n) fail("targeted recycling needs a group per household");
                basis[h] = group[h] < static_cast<std::size_t>(bottom) ? 1.0 : 0.0;
                break;
            case RecyclingScheme::none: break;
        }
    }
    const double mass = kernels::weighted_sum(w, basis);
    if (!(mass > 0.0)) fail("recycling target group is empty");
    const double per_unit = revenue / mass;
    std::vector<std::size_t> eligible;
    for (std::size_t h = 0; h < n; ++h) {
        t[h] = per_unit * basis[h];
        if (basis[h] > 0.0 && w[h] > 0.0) eligible.push_back(h);
    }
    // Put the rounding remainder on the lightest eligible household (the
    // finest steps in w * t), scanning a few ulps around the ideal value.
    // Weighted products are not evenly spaced, so other households are
    // nudged when no value fits.
    std::stable_sort(eligible.begin(), eligible.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
    const auto balances = [&] { return kernels::weighted_sum(w, t) == revenue; };
    const auto absorb = [&](std::size_t h) {
        const double centre = t[h] + (revenue - kernels::weighted_sum(w, t)) / w[h];
        double up = centre, down = centre;
        for (int k = 0; k < 64; ++k) {
            t[h] = up;
            if (balances()) return true;
            t[h] = down;
            if (down > 0.0 && balances()) return true;
            up = std::nextafter(up, std::numeric_limits<double>::infinity());
            down = std::max(0.0, std::nextafter(down, 0.0));
        }
        t[h] = std::max(0.0, centre);
        return false;
    };
    if (balances() || absorb(eligible.back())) return t;
    for (std::size_t j = eligible.size() - 1; j-- > 0 && j + 9 > eligible.size();) {
        const std::size_t h = eligible[j];
        const double base = t[h];
        double up = base, down = base;
        for (int k = 0; k < 64; ++k) {
            up = std::nextafter(up, std::numeric_limits<double>::infinity());
            down = std::max(0.0, std::nextafter(down, 0.0));
            for (double v : {up, down}) {
                t[h] = v;
                if (absorb(eligible.back())) return t;
            }
        }
        t[h] = base;
    }
    const double miss = revenue - kernels::weighted_sum(w, t);
    if (std::abs(miss) > 4.0 * std::abs(std::nextafter(revenue, 0.0) - revenue))
        throw NumericalError(kModule, "recycled revenue does not balance");
    log::warn("recycled revenue differs from the target by " + csv::format_exact(miss) +
              "; no representable transfer closes the gap");
    return t;
}

// ---------------------------------------------------------------------------
// Household evaluation

std::vector<HouseholdResult> evaluate_households(const EvaluationInputs& in, kernels::Execution exec) {
    const CategorySet& cats = *in.categories;
    const ExpenditureGroups& groups = *in.groups;
    const std::size_t n = in.households.size();
    const std::size_t n_cat = cats.size();
    if (in.relatives.size() != n_cat) fail("price relatives do not cover the categories");
    if (in.quantile.size() != n || in.transfers.size() != n) fail("evaluation inputs differ in length");
    if (in.elasticities->group_of.size() != n) fail("elasticity model does not cover the households");

    std::vector<double> p0(n_cat, 1.0), p1(n_cat);
    for (std::size_t c = 0; c < n_cat; ++c) p1[c] = 1.0 + in.relatives[c];

    std::vector<HouseholdResult> out(n);
    kernels::for_each_index(n, exec, [&](std::size_t i) {
        const HouseholdRecord& h = in.households[i];
        HouseholdResult r;
        r.id = h.id;
        r.weight = h.weight;
        r.size = h.size;
        r.group = in.quantile[i];
        r.total = h.total_expenditure();
        r.equivalised = dist::equivalise(r.total, h.size, in.equivalence);
        r.expenditure = h.expenditure;

        std::vector<std::vector<double>> parts(groups.size());
        for (std::size_t c = 0; c < n_cat; ++c)
            parts[groups.group_of[c]].push_back(h.expenditure[c] / r.total * in.relatives[c]);
        r.contribution.resize(groups.size());
        for (std::size_t g = 0; g < groups.size(); ++g) r.contribution[g] = kernels::sum(parts[g]);
        r.inflation = kernels::sum(r.contribution);
        r.burden = r.inflation * r.total;

        r.elasticity_group = in.elasticities->group_of[i];
        r.xi = demand::frisch_for_household(h, in.elasticity_options);
        const auto cal = demand::calibrate_household(
            h.expenditure, in.elasticities->groups[r.elasticity_group].budget_elasticities, r.xi);

        r.transfer = in.transfers[i];
        const double income = r.total + r.transfer;
        r.cv_gross = demand::compensating_variation(p0, p1, income, cal.les);
        r.cv_net = r.cv_gross - r.transfer;
        r.ye_pre = r.total;
        r.ye_post = demand::equivalent_income(p0, p1, income, cal.les);
        r.ye_pre_eq = dist::equivalise(r.ye_pre, h.size, in.equivalence);
        r.ye_post_eq = dist::equivalise(r.ye_post, h.size, in.equivalence);

        if (in.footprint) {
            r.footprint_before = io::household_footprint(h.expenditure, *in.footprint).total;
            r.footprint_after = demand::behavioural_emissions(*in.footprint, p0, p1, income, cal.les).after;
        }
        out[i] = std::move(r);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Tables

namespace {

double ratio(double a, double b) { return b != 0.0 ? a / b : std::numeric_limits<double>::quiet_NaN(); }

std::string idx(double v) { return std::isnan(v) ? "" : csv::format_index(v); }
std::string money(double v) { return std::isnan(v) ? "" : csv::format_money(v); }

// Weighted mean of f(h) over households with group == q (q == npos: all).
template <class F>
double group_mean(std::span<const HouseholdResult> hh, std::size_t q, F f) {
    std::vector<double> w, v;
    for (const auto& h : hh)
        if (q == std::string::npos || h.group == q) {
            w.push_back(h.weight);
            v.push_back(f(h));
        }
    return ratio(kernels::weighted_sum(w, v), kernels::sum(w));
}

std::string quantile_label(std::size_t q) { return std::to_string(q + 1); }

}  // namespace

TableSet build_tables(std::span<const HouseholdResult> hh, const CategorySet& categories,
                      const ExpenditureGroups& groups, const TableOptions& options) {
    if (hh.empty()) fail("no households to tabulate");
    const std::size_t n = hh.size();
    const std::size_t n_cat = categories.size();
    const std::size_t k = options.groups;
    constexpr std::size_t all = std::string::npos;
    std::vector<double> w(n), total(n), eq(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = hh[i].weight;
        total[i] = hh[i].total;
        eq[i] = hh[i].equivalised;
        if (hh[i].group >= k) fail("household '" + hh[i].id + "' has quantile group outside 1.." + std::to_string(k));
    }
    const double spend = kernels::weighted_sum(w, total);
    TableSet out;

    // Table 2: aggregate drivers of inflation.
    {
        csv::Writer t({"group", "budget_share", "avg_inflation_rate", "contribution"});
        std::vector<double> shares(groups.size()), contribs(groups.size());
        for (std::size_t g = 0; g < groups.size(); ++g) {
            std::vector<double> eg(n), bg(n);
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<double> parts;
                for (std::size_t c = 0; c < n_cat; ++c)
                    if (groups.group_of[c] == g) parts.push_back(hh[i].expenditure[c]);
                eg[i] = kernels::sum(parts);
                bg[i] = hh[i].contribution[g] * hh[i].total;
            }
            shares[g] = kernels::weighted_sum(w, eg) / spend;
            contribs[g] = kernels::weighted_sum(w, bg) / spend;
            t.add_row({groups.names[g], idx(shares[g]), idx(ratio(contribs[g], shares[g])), idx(contribs[g])});
        }
        const double share_total = kernels::sum(shares);
        const double contrib_total = kernels::sum(contribs);
        t.add_row({"Total", idx(share_total), idx(contrib_total), idx(contrib_total)});
        out["t2_inflation_drivers.csv"] = t.str();
    }

    // Table 3: budget shares by quantile.
    {
        std::vector<std::string> header = {"quantile"};
        for (const auto& g : groups.names) header.push_back(slug(g));
        header.push_back("relative_expenditure");
        csv::Writer t(header);
        const double mean_eq = group_mean(hh, all, [](const HouseholdResult& h) { return h.equivalised; });
        auto row = [&](std::size_t q, const std::string& label) {
            std::vector<std::string> r = {label};
            for (std::size_t g = 0; g < groups.size(); ++g)
                r.push_back(idx(group_mean(hh, q, [&](const HouseholdResult& h) {
                    std::vector<double> parts;
                    for (std::size_t c = 0; c < n_cat; ++c)
                        if (groups.group_of[c] == g) parts.push_back(h.expenditure[c]);
                    return kernels::sum(parts) / h.total;
                })));
            r.push_back(idx(group_mean(hh, q, [](const HouseholdResult& h) { return h.equivalised; }) / mean_eq));
            t.add_row(std::move(r));
        };
        for (std::size_t q = 0; q < k; ++q) row(q, quantile_label(q));
        row(all, "Average");
        out["t3_budget_shares.csv"] = t.str();
    }

    // Table 4: distributional characteristic per category.
    {
        csv::Writer t({"category", "label", "distributional_characteristic"});
        const auto theta = dist::welfare_weights(eq, w, options.welfare_epsilon);
        for (std::size_t c = 0; c < n_cat; ++c) {
            std::vector<double> x(n);
            for (std::size_t i = 0; i < n; ++i) x[i] = hh[i].expenditure[c];
            const bool consumed = kernels::weighted_sum(w, x) > 0.0;
            t.add_row({categories[c].id, categories[c].label,
                       consumed ? idx(dist::distributional_characteristic(theta.theta, theta.mean, x, w)) : ""});
        }
        out["t4_distributional_characteristic.csv"] = t.str();
    }

    // Table 5: inflation incidence by quantile.
    {
        std::vector<std::string> header = {"quantile"};
        for (const auto& g : groups.names) header.push_back(slug(g));
        header.push_back("average");
        csv::Writer t(header);
        auto row = [&](std::size_t q, const std::string& label) {
            std::vector<std::string> r = {label};
            for (std::size_t g = 0; g < groups.size(); ++g)
                r.push_back(idx(group_mean(hh, q, [&](const HouseholdResult& h) { return h.contribution[g]; })));
            r.push_back(idx(group_mean(hh, q, [](const HouseholdResult& h) { return h.inflation; })));
            t.add_row(std::move(r));
        };
        for (std::size_t q = 0; q < k; ++q) row(q, quantile_label(q));
        row(all, "Average");
        out["t5_incidence.csv"] = t.str();
    }

    // Table 6: progressivity on equivalised expenditure.
    {
        std::vector<std::vector<double>> burden(groups.size(), std::vector<double>(n));
        for (std::size_t g = 0; g < groups.size(); ++g)
            for (std::size_t i = 0; i < n; ++i) burden[g][i] = hh[i].contribution[g] * hh[i].equivalised;
        const auto rows = dist::progressivity_table(eq, burden, w, groups.names);
        csv::Writer t({"row", "ci_pre", "ci_burden", "ci_adjusted", "rs", "k", "avg_rate", "reranking",
                       "contribution_to_k"});
        for (const auto& r : rows)
            t.add_row({r.name, idx(r.ci_pre), idx(r.ci_burden), idx(r.ci_adjusted), idx(r.rs), idx(r.k),
                       idx(r.avg_rate), idx(r.reranking), idx(r.contribution_to_k)});
        out["t6_progressivity.csv"] = t.str();
    }

    // Table 7: price and behavioural components of the welfare loss.
    {
        csv::Writer t({"quantile", "inflation", "relative_cv", "behaviour", "relative_cv_net"});
        auto row = [&](std::size_t q, const std::string& label) {
            const double infl = group_mean(hh, q, [](const HouseholdResult& h) { return h.inflation; });
            const double rcv = group_mean(hh, q, [](const HouseholdResult& h) { return h.cv_gross / h.total; });
            const double net = group_mean(hh, q, [](const HouseholdResult& h) { return h.cv_net / h.total; });
            t.add_row({label, idx(infl), idx(rcv), idx(rcv - infl), idx(net)});
        };
        for (std::size_t q = 0; q < k; ++q) row(q, quantile_label(q));
        row(all, "Total");
        out["t7_welfare.csv"] = t.str();
    }

    // Tables 8 and 9: Atkinson welfare and its decomposition.
    {
        std::vector<double> pre(n), post(n);
        for (std::size_t i = 0; i < n; ++i) {
            pre[i] = hh[i].ye_pre_eq;
            post[i] = hh[i].ye_post_eq;
        }
        const auto a0 = dist::atkinson(pre, w, options.atkinson_epsilon);
        const auto a1 = dist::atkinson(post, w, options.atkinson_epsilon);
        csv::Writer t8({"row", "atkinson", "mean_ye", "yede"});
        t8.add_row({"pre", idx(a0.index), money(a0.mean), money(a0.yede)});
        t8.add_row({"post", idx(a1.index), money(a1.mean), money(a1.yede)});
        t8.add_row({"relative_change", idx(ratio(a1.index - a0.index, a0.index)), idx((a1.mean - a0.mean) / a0.mean),
                    idx((a1.yede - a0.yede) / a0.yede)});
        out["t8_atkinson.csv"] = t8.str();

        const auto d = dist::welfare_decomposition(a0, a1);
        csv::Writer t9({"component", "welfare_change", "percent"});
        t9.add_row({"equity", idx(d.equity), idx(100.0 * ratio(d.equity, d.total))});
        t9.add_row({"efficiency", idx(d.efficiency), idx(100.0 * ratio(d.efficiency, d.total))});
        t9.add_row({"interaction", idx(d.interaction), idx(100.0 * ratio(d.interaction, d.total))});
        t9.add_row({"total", idx(d.total), idx(d.total != 0.0 ? 100.0 : std::numeric_limits<double>::quiet_NaN())});
        out["t9_decomposition.csv"] = t9.str();
    }
    return out;
}

namespace {

std::vector<std::string> result_header(const CategorySet& categories, const ExpenditureGroups& groups) {
    std::vector<std::string> h = {"id", "weight", "size", "quantile", "total_expenditure", "equivalised",
                                  "inflation", "burden", "transfer", "cv_gross", "cv_net", "ye_pre", "ye_post",
                                  "ye_pre_eq", "ye_post_eq", "footprint_before", "footprint_after", "xi",
                                  "elasticity_group"};
    for (const auto& g : groups.names) h.push_back("contrib_" + slug(g));
    for (const auto& c : categories.items()) h.push_back("exp_" + c.id);
    return h;
}

}  // namespace

std::string format_household_results(std::span<const HouseholdResult> hh, const CategorySet& categories,
                                     const ExpenditureGroups& groups) {
    csv::Writer w(result_header(categories, groups));
    using csv::format_exact;
    for (const auto& h : hh) {
        std::vector<std::string> r = {h.id,
                                      format_exact(h.weight),
                                      std::to_string(h.size),
                                      std::to_string(h.group + 1),
                                      format_exact(h.total),
                                      format_exact(h.equivalised),
                                      format_exact(h.inflation),
                                      format_exact(h.burden),
                                      format_exact(h.transfer),
                                      format_exact(h.cv_gross),
                                      format_exact(h.cv_net),
                                      format_exact(h.ye_pre),
                                      format_exact(h.ye_post),
                                      format_exact(h.ye_pre_eq),
                                      format_exact(h.ye_post_eq),
                                      format_exact(h.footprint_before),
                                      format_exact(h.footprint_after),
                                      format_exact(h.xi),
                                      std::to_string(h.elasticity_group)};
        for (double v : h.contribution) r.push_back(format_exact(v));
        for (double v : h.expenditure) r.push_back(format_exact(v));
        w.add_row(std::move(r));
    }
    return w.str();
}

std::vector<HouseholdResult> parse_household_results(const std::string& text, const CategorySet& categories,
                                                     const ExpenditureGroups& groups, const std::string& source) {
    const csv::Table t = csv::parse(text, source);
    csv::require_unique_header(t);
    const auto header = result_header(categories, groups);
    std::vector<std::size_t> col(header.size());
    for (std::size_t j = 0; j < header.size(); ++j) col[j] = t.require(header[j]);
    const std::size_t fixed = 19;
    std::vector<HouseholdResult> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        HouseholdResult h;
        auto num = [&](std::size_t j) { return t.number(r, col[j]); };
        h.id = t.rows[r][col[0]];
        h.weight = num(1);
        h.size = static_cast<int>(num(2));
        const double q = num(3);
        if (q < 1.0 || q != std::floor(q)) fail(source + ": line " + std::to_string(r + 2) + ": bad quantile");
        h.group = static_cast<std::size_t>(q) - 1;
        h.total = num(4);
        h.equivalised = num(5);
        h.inflation = num(6);
        h.burden = num(7);
        h.transfer = num(8);
        h.cv_gross = num(9);
        h.cv_net = num(10);
        h.ye_pre = num(11);
        h.ye_post = num(12);
        h.ye_pre_eq = num(13);
        h.ye_post_eq = num(14);
        h.footprint_before = num(15);
        h.footprint_after = num(16);
        h.xi = num(17);
        h.elasticity_group = static_cast<std::size_t>(num(18));
        for (std::size_t g = 0; g < groups.size(); ++g) h.contribution.push_back(num(fixed + g));
        for (std::size_t c = 0; c < categories.size(); ++c) h.expenditure.push_back(num(fixed + groups.size() + c));
        out.push_back(std::move(h));
    }
    return out;
}

std::vector<HouseholdResult> load_household_results(const std::filesystem::path& path, const CategorySet& categories,
                                                    const ExpenditureGroups& groups) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open '" + path.string() + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_household_results(text, categories, groups, path.string());
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

Eigen::VectorXd load_sector_shock(const std::filesystem::path& path, const MrioTable& t) {
    const csv::Table s = csv::read(path);
    csv::require_unique_header(s);
    const std::size_t sc = s.require("sector"), vc = s.require("shock");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t.size()));
    for (std::size_t r = 0; r < s.rows.size(); ++r) {
        auto it = std::find(t.sectors.begin(), t.sectors.end(), s.rows[r][sc]);
        if (it == t.sectors.end()) fail(s.source + ": line " + std::to_string(r + 2) + ": unknown sector '" + s.rows[r][sc] + "'");
        v(it - t.sectors.begin()) = s.number(r, vc);
    }
    return v;
}

}  // namespace

ScenarioResult run_scenario(const RunConfig& config) {
    config.validate();
    ScenarioResult res;
    res.config = config;
    res.categories = CategorySet::canonical();
    res.groups = ExpenditureGroups::summary(res.categories);
    const auto& cats = res.categories;
    const auto exec = config.execution;

    auto survey = load_household_survey(config.resolve(config.households), cats);
    res.load = survey.report;
    if (res.load.dropped_zero_expenditure > 0)
        log::warn(std::to_string(res.load.dropped_zero_expenditure) + " households with zero expenditure dropped");
    std::vector<HouseholdRecord> households = std::move(survey.records);
    if (config.impute) {
        SurveyLoadOptions opt;
        opt.require_expenditure = false;
        const auto income = load_household_survey(config.resolve(config.income), cats, opt);
        imputation::ImputationOptions io;
        io.link = config.link;
        io.min_income = config.min_income;
        io.seed = config.seed;
        io.exec = exec;
        auto imp = imputation::impute(households, income.records, io);
        households = std::move(imp.records);
        res.imputed = households.size();
    }
    if (households.empty()) fail("no households left to simulate");

    std::vector<double> w(households.size()), eq(households.size());
    for (std::size_t i = 0; i < households.size(); ++i) {
        w[i] = households[i].weight;
        eq[i] = dist::equivalise(households[i].total_expenditure(), households[i].size, config.equivalence);
    }
    const auto quantile = dist::weighted_quantile_groups(eq, w, config.groups);
    res.elasticities = demand::estimate_elasticities(households, quantile, config.elasticity);
    if (res.elasticities.floored > 0)
        log::info(std::to_string(res.elasticities.floored) + " negative budget elasticities floored at zero");

    // Observed price changes.
    std::vector<double> relatives(cats.size(), 0.0);
    if (!config.prices.empty()) relatives = load_prices(config.resolve(config.prices), cats);
    std::vector<IndirectTax> taxes;
    if (!config.taxes.empty()) taxes = load_taxes(config.resolve(config.taxes), cats);
    if (!config.taxes_post.empty()) {
        const auto post = load_taxes(config.resolve(config.taxes_post), cats);
        std::vector<double> reform(cats.size());
        for (std::size_t c = 0; c < cats.size(); ++c) reform[c] = consumer_price_relative(0.0, taxes[c], post[c]);
        relatives = compose_relatives(relatives, reform);
    }

    std::optional<MrioTable> mrio;
    std::optional<BridgingMatrix> bridge;
    std::optional<FuelTable> fuels;
    if (!config.mrio.empty()) mrio = load_mrio(MrioPaths::in_directory(config.resolve(config.mrio)));
    if (!config.bridge.empty()) bridge = load_bridge(config.resolve(config.bridge), cats);
    if (!config.fuels.empty()) fuels = load_fuels(config.resolve(config.fuels));

    std::vector<double> household_revenue(households.size(), 0.0);
    if (config.carbon_tax > 0.0 || !config.sector_shock.empty()) {
        CarbonInputs ci;
        ci.mrio = &*mrio;
        ci.bridge = &*bridge;
        ci.fuels = fuels ? &*fuels : nullptr;
        ci.direct_fuel = config.direct_fuel;
        ci.taxes = taxes;
        ci.passthrough = config.passthrough;
        ci.border_adjustment = config.border_adjustment;
        if (!config.sector_shock.empty()) ci.extra_shock = load_sector_shock(config.resolve(config.sector_shock), *mrio);
        auto cs = carbon_tax_scenario(config.carbon_tax, ci, households, cats, exec);
        res.revenue = cs.revenue;
        relatives = compose_relatives(relatives, cs.prices.relatives());
        res.carbon = std::move(cs.prices);
    }
    PriceScenario ps;
    ps.relatives = relatives;
    ps.validate(cats.size());
    res.relatives = relatives;

    std::optional<io::FootprintModel> footprint;
    if (mrio && bridge) {
        const auto l = io::leontief_inverse(io::technology_matrix(*mrio), io::LeontiefMethod::direct, {}, exec);
        const auto m = io::embodied_intensity(l, io::sector_intensity(*mrio), exec);
        const FuelTable none;
        footprint = io::make_footprint_model(*bridge, m.total, fuels ? *fuels : none, config.direct_fuel, cats);
    }

    EvaluationInputs in;
    in.categories = &res.categories;
    in.groups = &res.groups;
    in.households = households;
    in.quantile = quantile;
    in.elasticities = &res.elasticities;
    in.elasticity_options = config.elasticity;
    in.relatives = relatives;
    in.transfers = recycle_revenue(res.revenue, config.recycling, households, quantile, config.targeted_groups);
    in.footprint = footprint ? &*footprint : nullptr;
    in.equivalence = config.equivalence;
    res.households = evaluate_households(in, exec);

    res.tables = build_tables(res.households, cats, res.groups,
                              {config.welfare_epsilon, config.atkinson_epsilon, config.groups});
    return res;
}

std::string manifest_json(const RunConfig& config, const std::map<std::string, std::string>& facts,
                          const std::vector<std::string>& files) {
    nlohmann::ordered_json j;
    j["tool"] = "prices";
    j["version"] = kVersion;
    j["config_hash"] = config.hash();
    j["seed"] = config.seed;
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config.effective()) cfg[k] = v;
    j["config"] = cfg;
    nlohmann::ordered_json f = nlohmann::ordered_json::object();
    for (const auto& [k, v] : facts) f[k] = v;
    j["results"] = f;
    j["files"] = files;
    j["libraries"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                    std::to_string(EIGEN_MINOR_VERSION)},
                      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    return j.dump(2) + "\n";
}

void write_tables(const TableSet& tables, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail("cannot create output directory '" + dir.string() + "': " + ec.message());
    for (const auto& [name, text] : tables) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) fail("cannot write '" + (dir / name).string() + "'");
        out << text;
        if (!out) fail("write failed for '" + (dir / name).string() + "'");
    }
}

std::vector<std::string> emit_reports(const ScenarioResult& result, const std::filesystem::path& dir) {
    TableSet files = result.tables;
    files["households.csv"] = format_household_results(result.households, result.categories, result.groups);
    files["elasticities.csv"] = demand::format_elasticity_table(result.elasticities, result.categories);
    {
        csv::Writer pr({"category", "relative"});
        for (std::size_t c = 0; c < result.categories.size(); ++c)
            pr.add_row({result.categories[c].id, csv::format_exact(result.relatives[c])});
        files["price_relatives.csv"] = pr.str();
    }
    std::vector<std::string> names;
    for (const auto& [name, text] : files) names.push_back(name);
    names.push_back("manifest.json");
    std::sort(names.begin(), names.end());

    std::vector<double> w, b, c;
    for (const auto& h : result.households) {
        w.push_back(h.weight);
        b.push_back(h.burden);
        c.push_back(h.total);
    }
    std::map<std::string, std::string> facts = {
        {"households", std::to_string(result.households.size())},
        {"dropped_zero_expenditure", std::to_string(result.load.dropped_zero_expenditure)},
        {"imputed", std::to_string(result.imputed)},
        {"revenue", csv::format_money(result.revenue)},
        {"aggregate_inflation", csv::format_index(kernels::weighted_sum(w, b) / kernels::weighted_sum(w, c))},
        {"floored_budget_elasticities", std::to_string(result.elasticities.floored)},
    };
    files["manifest.json"] = manifest_json(result.config, facts, names);
    write_tables(files, dir);
    return names;
}

TableSet report_from_results(const std::filesystem::path& households_csv, const RunConfig& config) {
    const CategorySet cats = CategorySet::canonical();
    const ExpenditureGroups groups = ExpenditureGroups::summary(cats);
    const auto hh = load_household_results(households_csv, cats, groups);
    return build_tables(hh, cats, groups, {config.welfare_epsilon, config.atkinson_epsilon, config.groups});
}

}  // namespace prices::scenario
