#include "prices/demand.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>

#include "prices/csv.hpp"
#include "prices/error.hpp"
#include "prices/log.hpp"
#include "prices/regression.hpp"

namespace prices::demand {

namespace {

constexpr const char* kModule = "demand-system";

void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw DataError(kModule, std::string(what) + ": vector lengths differ");
}

// sum_i phi_i (ln p1_i - ln p0_i) over goods with phi_i > 0.
double log_price_index_ratio(std::span<const double> p1, std::span<const double> p0, const LesParameters& les) {
    double s = 0.0;
    for (std::size_t i = 0; i < les.size(); ++i)
        if (les.marginal_shares[i] > 0.0) s += les.marginal_shares[i] * (std::log(p1[i]) - std::log(p0[i]));
    return s;
}

void check_prices(std::span<const double> p, const LesParameters& les) {
    require_same_length(p.size(), les.size(), "prices");
    for (double v : p)
        if (!(v > 0.0)) throw DataError(kModule, "prices must be strictly positive");
}

double supernumerary(std::span<const double> p, double total, const LesParameters& les) {
    const double s = total - les.committed_cost(p);
    if (!(s > 0.0))
        throw NumericalError(kModule, "infeasible budget: committed cost " + csv::format_exact(total - s) +
                                          " is not below total expenditure " + csv::format_exact(total));
    return s;
}

LesParameters calibrate_impl(std::span<const double> own_price, std::span<const double> eta,
                             std::span<const double> shares, std::span<const double> quantities, double total,
                             std::size_t* negative_count) {
    const std::size_t n = shares.size();
    require_same_length(own_price.size(), n, "les_calibrate");
    require_same_length(eta.size(), n, "les_calibrate");
    require_same_length(quantities.size(), n, "les_calibrate");

    LesParameters les;
    les.committed.assign(n, 0.0);
    les.marginal_shares.assign(n, 0.0);
    double phi_sum = 0.0;
    double base_committed = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (quantities[i] == 0.0 || shares[i] == 0.0) continue;
        if (own_price[i] > 0.0) throw DataError(kModule, "own-price elasticity must be <= 0");
        const double phi = eta[i] * shares[i];
        if (phi < 0.0) throw DataError(kModule, "negative marginal budget share (inferior good)");
        if (phi >= 1.0)
            throw NumericalError(kModule, "marginal budget share " + csv::format_exact(phi) + " is not below 1");
        les.marginal_shares[i] = phi;
        les.committed[i] = (own_price[i] + 1.0) * quantities[i] / (1.0 - phi);
        if (les.committed[i] < 0.0 && negative_count) ++*negative_count;
        phi_sum += phi;
        base_committed += (shares[i] * total / quantities[i]) * les.committed[i];
    }
    if (std::abs(phi_sum - 1.0) > 1e-6)
        throw DataError(kModule, "marginal budget shares sum to " + csv::format_exact(phi_sum) +
                                     "; budget elasticities violate Engel aggregation");
    if (!(total - base_committed > 0.0))
        throw NumericalError(kModule, "nonpositive supernumerary expenditure at base prices");
    return les;
}

int size_band(int size) { return size <= 2 ? 0 : (size <= 5 ? 1 : 2); }

const char* size_band_label(int band) {
    static const char* labels[] = {"size1-2", "size3-5", "size6+"};
    return labels[band];
}

}  // namespace

double budget_elasticity(double share, double beta, double gamma, double log_total) {
    if (share == 0.0) throw DataError(kModule, "budget elasticity undefined for a zero budget share");
    return 1.0 + (beta + 2.0 * gamma * log_total) / share;
}

double frisch_parameter(double consumption_per_capita_month, double exchange_rate, FrischParameters params) {
    if (consumption_per_capita_month < 0.0) throw DataError(kModule, "consumption must be >= 0");
    if (!(exchange_rate > 0.0)) throw DataError(kModule, "exchange rate must be > 0");
    const double arg = consumption_per_capita_month / exchange_rate + params.offset;
    if (!(arg > 0.0)) throw NumericalError(kModule, "C/ER + G must be positive");
    const double raw = -std::exp(params.phi - params.alpha * std::log(arg));
    return std::min(raw, params.cap);
}

double frisch_parameter_gdp(double gdp_per_capita, double cap) {
    if (!(gdp_per_capita > 0.0)) throw DataError(kModule, "GDP per capita must be > 0");
    const double inv = 0.485829 + 0.104019 * std::log(gdp_per_capita);
    if (!(inv > 0.0)) throw NumericalError(kModule, "GDP per capita too small for the cross-country formula");
    return std::min(-1.0 / inv, cap);
}

Eigen::MatrixXd price_elasticities(std::span<const double> eta, std::span<const double> shares, double xi) {
    require_same_length(eta.size(), shares.size(), "price_elasticities");
    if (xi == 0.0) throw DataError(kModule, "Frisch parameter must be nonzero");
    const auto n = static_cast<Eigen::Index>(eta.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
            m(i, j) = -eta[ui] * shares[uj] * (1.0 + eta[uj] / xi) + (i == j ? eta[ui] / xi : 0.0);
        }
    return m;
}

double LesParameters::committed_cost(std::span<const double> prices) const {
    double s = 0.0;
    for (std::size_t i = 0; i < committed.size(); ++i) s += prices[i] * committed[i];
    return s;
}

LesParameters les_calibrate(std::span<const double> own_price, std::span<const double> eta,
                            std::span<const double> shares, std::span<const double> quantities, double total) {
    std::size_t negative = 0;
    LesParameters les = calibrate_impl(own_price, eta, shares, quantities, total, &negative);
    if (negative > 0)
        log::warn("LES calibration produced " + std::to_string(negative) +
                  " negative committed quantities (own-price elasticity below -1); retained");
    return les;
}

std::vector<double> les_demand(std::span<const double> prices, double total, const LesParameters& les) {
    check_prices(prices, les);
    const double s = supernumerary(prices, total, les);
    std::vector<double> x(les.size());
    for (std::size_t i = 0; i < les.size(); ++i) x[i] = les.committed[i] + les.marginal_shares[i] * s / prices[i];
    return x;
}

double indirect_utility(std::span<const double> prices, double total, const LesParameters& les) {
    check_prices(prices, les);
    const double s = supernumerary(prices, total, les);
    double log_a = 0.0;
    for (std::size_t i = 0; i < les.size(); ++i) {
        const double phi = les.marginal_shares[i];
        if (phi > 0.0) log_a += phi * (std::log(prices[i]) - std::log(phi));
    }
    return s * std::exp(-log_a);
}

double expenditure_function(std::span<const double> prices, double utility, const LesParameters& les) {
    check_prices(prices, les);
    double log_a = 0.0;
    for (std::size_t i = 0; i < les.size(); ++i) {
        const double phi = les.marginal_shares[i];
        if (phi > 0.0) log_a += phi * (std::log(prices[i]) - std::log(phi));
    }
    return les.committed_cost(prices) + utility * std::exp(log_a);
}

double compensating_variation(std::span<const double> p0, std::span<const double> p1, double total,
                              const LesParameters& les) {
    check_prices(p0, les);
    check_prices(p1, les);
    const double s0 = supernumerary(p0, total, les);
    supernumerary(p1, total, les);
    return (les.committed_cost(p1) - les.committed_cost(p0)) + s0 * std::expm1(log_price_index_ratio(p1, p0, les));
}

double equivalent_variation(std::span<const double> p0, std::span<const double> p1, double total,
                            const LesParameters& les) {
    return total - equivalent_income(p0, p1, total, les);
}

double equivalent_income(std::span<const double> reference_prices, std::span<const double> prices, double total,
                         const LesParameters& les) {
    check_prices(reference_prices, les);
    check_prices(prices, les);
    const double s = supernumerary(prices, total, les);
    return total + (les.committed_cost(reference_prices) - les.committed_cost(prices)) +
           s * std::expm1(log_price_index_ratio(reference_prices, prices, les));
}

EmissionsChange behavioural_emissions(std::span<const double> intensity, std::span<const double> p0,
                                      std::span<const double> p1, double total, const LesParameters& les) {
    require_same_length(intensity.size(), les.size(), "behavioural_emissions");
    const auto x0 = les_demand(p0, total, les);
    const auto x1 = les_demand(p1, total, les);
    EmissionsChange e;
    for (std::size_t i = 0; i < les.size(); ++i) {
        e.before += intensity[i] * p0[i] * x0[i];
        e.after += intensity[i] * p0[i] * x1[i];
    }
    e.delta = e.after - e.before;
    return e;
}

EmissionsChange behavioural_emissions(const io::FootprintModel& model, std::span<const double> p0,
                                      std::span<const double> p1, double total, const LesParameters& les) {
    auto x0 = les_demand(p0, total, les);
    auto x1 = les_demand(p1, total, les);
    for (std::size_t i = 0; i < les.size(); ++i) {
        x0[i] *= p0[i];
        x1[i] *= p0[i];
    }
    EmissionsChange e;
    e.before = io::household_footprint(x0, model).total;
    e.after = io::household_footprint(x1, model).total;
    e.delta = e.after - e.before;
    return e;
}

HouseholdCalibration calibrate_household(std::span<const double> expenditure,
                                         std::span<const double> group_elasticities, double xi) {
    const std::size_t n = expenditure.size();
    require_same_length(group_elasticities.size(), n, "calibrate_household");
    if (!(xi < 0.0)) throw DataError(kModule, "Frisch parameter must be negative");
    const double total = std::accumulate(expenditure.begin(), expenditure.end(), 0.0);
    if (!(total > 0.0)) throw DataError(kModule, "household has no expenditure");

    std::vector<double> w(n), eta(n, 0.0);
    double agg = 0.0;
    std::size_t positive = 0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = expenditure[i] / total;
        if (w[i] > 0.0) {
            ++positive;
            eta[i] = std::max(0.0, group_elasticities[i]);
            agg += w[i] * eta[i];
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (w[i] > 0.0) eta[i] = agg > 0.0 ? eta[i] / agg : 1.0;

    HouseholdCalibration out;
    out.xi = xi;
    out.budget_elasticities = eta;

    double max_phi = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_phi = std::max(max_phi, eta[i] * w[i]);
    if (positive == 1 || max_phi >= 1.0 - 1e-12) {
        // One good absorbs all marginal spending; closed form of the
        // committed quantities, gamma_i = (1 + eta_i / xi) x_i.
        out.les.committed.assign(n, 0.0);
        out.les.marginal_shares.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (w[i] == 0.0) continue;
            const double phi = eta[i] * w[i];
            if (phi >= 1.0 - 1e-12) {
                out.les.marginal_shares[i] = 1.0;
            } else {
                out.les.committed[i] = (1.0 + eta[i] / xi) * expenditure[i];
            }
        }
        return out;
    }

    const Eigen::MatrixXd m = price_elasticities(eta, w, xi);
    std::vector<double> own(n);
    for (std::size_t i = 0; i < n; ++i) own[i] = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    out.les = calibrate_impl(own, eta, w, expenditure, total, nullptr);
    return out;
}

double frisch_for_household(const HouseholdRecord& h, const ElasticityOptions& options) {
    if (!(options.period_months > 0.0)) throw DataError(kModule, "expenditure period must be > 0 months");
    const double pc_month = h.total_expenditure() / h.size / options.period_months;
    return frisch_parameter(pc_month, options.exchange_rate, options.frisch);
}

ElasticityModel estimate_elasticities(std::span<const HouseholdRecord> households,
                                      std::span<const std::size_t> quantile_group, const ElasticityOptions& options) {
    if (households.empty()) throw DataError(kModule, "no households to estimate elasticities on");
    require_same_length(quantile_group.size(), households.size(), "estimate_elasticities");
    if (!(options.exchange_rate > 0.0)) throw DataError(kModule, "exchange rate is required and must be > 0");
    if (!(options.period_months > 0.0)) throw DataError(kModule, "expenditure period must be > 0 months");
    const std::size_t n_cat = households.front().expenditure.size();

    // Demographic band per household.
    std::vector<int> band(households.size(), 0);
    std::map<int, std::string> band_label;
    for (std::size_t h = 0; h < households.size(); ++h) {
        switch (options.grouping.key) {
            case GroupingKey::none:
                band[h] = 0;
                band_label[0] = "";
                break;
            case GroupingKey::size_band:
                band[h] = size_band(households[h].size);
                band_label[band[h]] = size_band_label(band[h]);
                break;
            case GroupingKey::demographic: {
                auto it = households[h].demographics.find(options.grouping.demographic);
                if (it == households[h].demographics.end())
                    throw DataError(kModule, "household '" + households[h].id + "' lacks demographic '" +
                                                 options.grouping.demographic + "'");
                band[h] = static_cast<int>(std::lround(it->second));
                band_label[band[h]] = options.grouping.demographic + std::to_string(band[h]);
                break;
            }
        }
    }

    std::vector<double> log_c(households.size()), weights(households.size());
    std::vector<std::vector<double>> shares(households.size());
    for (std::size_t h = 0; h < households.size(); ++h) {
        double c = households[h].total_expenditure();
        if (options.engel_scale == EngelScale::per_capita_month) c /= households[h].size * options.period_months;
        log_c[h] = std::log(c);
        weights[h] = households[h].weight;
        shares[h] = households[h].budget_shares();
    }

    using Coefs = std::vector<std::pair<double, double>>;  // (beta, gamma) per category
    auto fit_engel = [&](const std::vector<std::size_t>& members) -> std::optional<Coefs> {
        regression::Design d;
        d.names = {"const", "ln_c", "ln_c_sq"};
        d.x.resize(static_cast<Eigen::Index>(members.size()), 3);
        std::vector<double> w(members.size());
        for (std::size_t k = 0; k < members.size(); ++k) {
            const double l = log_c[members[k]];
            d.x.row(static_cast<Eigen::Index>(k)) << 1.0, l, l * l;
            w[k] = weights[members[k]];
        }
        Coefs out(n_cat);
        std::vector<double> y(members.size());
        try {
            for (std::size_t c = 0; c < n_cat; ++c) {
                for (std::size_t k = 0; k < members.size(); ++k) y[k] = shares[members[k]][c];
                const auto fit = regression::wls_fit(d, y, w);
                out[c] = {fit.coefficients(1), fit.coefficients(2)};
            }
        } catch (const DataError&) {
            return std::nullopt;
        }
        return out;
    };

    std::vector<std::size_t> all(households.size());
    std::iota(all.begin(), all.end(), 0);
    const auto pooled = fit_engel(all);
    if (!pooled) throw DataError(kModule, "Engel curves cannot be estimated on the pooled sample");

    std::map<int, Coefs> band_fit;
    for (const auto& [b, label] : band_label) {
        std::vector<std::size_t> members;
        for (std::size_t h = 0; h < households.size(); ++h)
            if (band[h] == b) members.push_back(h);
        std::optional<Coefs> fit;
        if (members.size() >= options.min_group_size) fit = fit_engel(members);
        band_fit[b] = fit ? *fit : *pooled;
    }

    ElasticityModel model;
    model.group_of.assign(households.size(), 0);
    std::map<std::pair<std::size_t, int>, std::size_t> cell_index;
    for (std::size_t h = 0; h < households.size(); ++h) {
        const auto key = std::make_pair(quantile_group[h], band[h]);
        if (!cell_index.count(key)) cell_index.emplace(key, 0);
    }
    for (auto& [key, idx] : cell_index) {
        idx = model.groups.size();
        ElasticityGroup g;
        g.label = "q" + std::to_string(key.first + 1);
        if (!band_label[key.second].empty()) g.label += "_" + band_label[key.second];
        model.groups.push_back(std::move(g));
    }

    for (auto& [key, idx] : cell_index) {
        ElasticityGroup& g = model.groups[idx];
        double wsum = 0.0, lsum = 0.0, csum = 0.0, pcsum = 0.0;
        g.mean_shares.assign(n_cat, 0.0);
        for (std::size_t h = 0; h < households.size(); ++h) {
            if (quantile_group[h] != key.first || band[h] != key.second) continue;
            model.group_of[h] = idx;
            const double w = weights[h];
            wsum += w;
            lsum += w * log_c[h];
            csum += w * households[h].total_expenditure();
            pcsum += w * households[h].total_expenditure() / households[h].size / options.period_months;
            for (std::size_t c = 0; c < n_cat; ++c) g.mean_shares[c] += w * shares[h][c];
        }
        if (!(wsum > 0.0)) throw DataError(kModule, "group '" + g.label + "' has zero total weight");
        for (auto& s : g.mean_shares) s /= wsum;
        const double mean_log = lsum / wsum;
        g.mean_total = csum / wsum;
        g.mean_per_capita_month = pcsum / wsum;
        g.xi = frisch_parameter(g.mean_per_capita_month, options.exchange_rate, options.frisch);

        const Coefs& coefs = band_fit[key.second];
        g.budget_elasticities.assign(n_cat, 0.0);
        double agg = 0.0;
        for (std::size_t c = 0; c < n_cat; ++c) {
            if (g.mean_shares[c] <= 0.0) continue;
            double eta = budget_elasticity(g.mean_shares[c], coefs[c].first, coefs[c].second, mean_log);
            if (eta < 0.0) {
                eta = 0.0;
                ++model.floored;
            }
            g.budget_elasticities[c] = eta;
            agg += g.mean_shares[c] * eta;
        }
        if (agg > 0.0)
            for (auto& e : g.budget_elasticities) e /= agg;
    }
    return model;
}

std::string format_elasticity_table(const ElasticityModel& model, const CategorySet& categories) {
    csv::Writer w({"category", "eta", "eta_own", "phi", "gamma", "xi", "group"});
    for (const auto& g : model.groups) {
        std::vector<double> quantities(g.mean_shares.size());
        for (std::size_t c = 0; c < quantities.size(); ++c) quantities[c] = g.mean_shares[c] * g.mean_total;
        const auto cal = calibrate_household(quantities, g.budget_elasticities, g.xi);
        const Eigen::MatrixXd m = price_elasticities(cal.budget_elasticities, g.mean_shares, g.xi);
        for (std::size_t c = 0; c < categories.size(); ++c) {
            const auto ci = static_cast<Eigen::Index>(c);
            const bool empty = g.mean_shares[c] == 0.0;
            w.add_row({categories[c].id, empty ? "" : csv::format_index(cal.budget_elasticities[c]),
                       empty ? "" : csv::format_index(m(ci, ci)), csv::format_index(cal.les.marginal_shares[c]),
                       csv::format_money(cal.les.committed[c]), csv::format_index(g.xi), g.label});
        }
    }
    return w.str();
}

}  // namespace prices::demand
