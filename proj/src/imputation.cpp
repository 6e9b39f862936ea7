#include "prices/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "prices/error.hpp"
#include "prices/log.hpp"

namespace prices::imputation {

namespace {

constexpr const char* kModule = "imputation";

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

double normal_draw(std::uint64_t seed, double mean, double variance) {
    if (variance <= 0.0) return mean;
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist(mean, std::sqrt(variance));
    return dist(gen);
}

std::vector<double> incomes_of(std::span<const HouseholdRecord> records, const char* dataset) {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& h : records) {
        if (!h.disposable_income)
            throw DataError(kModule, std::string(dataset) + " record '" + h.id + "' has no disposable income");
        out.push_back(*h.disposable_income);
    }
    return out;
}

void fill_row(regression::Design& d, Eigen::Index r, std::initializer_list<double> lead, const std::vector<double>& demo) {
    Eigen::Index c = 0;
    for (double v : lead) d.x(r, c++) = v;
    for (double v : demo) d.x(r, c++) = v;
}

// Constant-only fit expressed over the full design, used when the
// conditional share equation cannot be estimated on its subsample.
regression::RegressionFit constant_fit(const regression::Design& full, std::span<const double> y,
                                       std::span<const double> w) {
    regression::Design d;
    d.names = {"const"};
    d.x = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(y.size()), 1);
    regression::RegressionFit fit;
    if (y.size() > 1) {
        fit = regression::wls_fit(d, y, w);
    } else {
        fit.coefficients = Eigen::VectorXd::Constant(1, y.empty() ? 0.0 : y[0]);
        fit.n_obs = y.size();
    }
    const double c = fit.coefficients(0);
    fit.names = full.names;
    fit.coefficients = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(full.names.size()));
    fit.coefficients(0) = c;
    return fit;
}

}  // namespace

std::pair<double, double> mean_sd(std::span<const double> values) {
    if (values.size() < 2) throw DataError(kModule, "need at least two values for a standard deviation");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

std::vector<bool> chauvenet_outliers(std::span<const double> values) {
    const auto [mean, sd] = mean_sd(values);
    std::vector<bool> out(values.size(), false);
    if (sd == 0.0) return out;
    const double n = static_cast<double>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double z = std::abs(values[i] - mean) / sd;
        out[i] = n * std::erfc(z / std::sqrt(2.0)) < 0.5;
    }
    return out;
}

std::size_t IncomeCalibration::outliers() const {
    return static_cast<std::size_t>(std::count(outlier.begin(), outlier.end(), true));
}

IncomeCalibration calibrate_income(std::span<const double> income, double target_mean, double target_sd) {
    if (!(target_sd >= 0.0)) throw DataError(kModule, "target standard deviation must be >= 0");
    IncomeCalibration c;
    c.outlier = chauvenet_outliers(income);
    std::vector<double> kept;
    for (std::size_t i = 0; i < income.size(); ++i)
        if (!c.outlier[i]) kept.push_back(income[i]);
    const auto [mean, sd] = mean_sd(kept);
    if (sd == 0.0) throw DataError(kModule, "income has zero spread after excluding outliers; cannot calibrate");
    c.source_mean = mean;
    c.source_sd = sd;
    c.scale = target_sd / sd;
    c.shift = target_mean - c.scale * mean;
    c.values.resize(income.size());
    for (std::size_t i = 0; i < income.size(); ++i) c.values[i] = target_mean + (income[i] - mean) * c.scale;
    return c;
}

std::vector<std::string> CovariateSpec::names() const {
    std::vector<std::string> out;
    if (size_bands) {
        out.push_back("size_3_5");
        out.push_back("size_6p");
    }
    for (const auto& d : indicators) out.push_back(d);
    if (head_age_bands) {
        out.push_back("head_age_35_54");
        out.push_back("head_age_55p");
    }
    return out;
}

std::vector<double> CovariateSpec::values(const HouseholdRecord& h) const {
    auto demo = [&](const std::string& name) {
        auto it = h.demographics.find(name);
        if (it == h.demographics.end())
            throw DataError(kModule, "record '" + h.id + "' is missing covariate '" + name + "'");
        return it->second;
    };
    std::vector<double> out;
    if (size_bands) {
        out.push_back(h.size >= 3 && h.size <= 5 ? 1.0 : 0.0);
        out.push_back(h.size >= 6 ? 1.0 : 0.0);
    }
    for (const auto& d : indicators) out.push_back(demo(d));
    if (head_age_bands) {
        const double age = demo("head_age");
        out.push_back(age >= 35.0 && age < 55.0 ? 1.0 : 0.0);
        out.push_back(age >= 55.0 ? 1.0 : 0.0);
    }
    return out;
}

regression::Design total_expenditure_design(std::span<const HouseholdRecord> records, std::span<const double> income,
                                            const CovariateSpec& spec) {
    regression::Design d;
    d.names = {"const", "ln_income"};
    for (auto& n : spec.names()) d.names.push_back(n);
    d.x.resize(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(d.names.size()));
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!(income[i] > 0.0))
            throw DataError(kModule, "record '" + records[i].id + "' has nonpositive income");
        fill_row(d, static_cast<Eigen::Index>(i), {1.0, std::log(income[i])}, spec.values(records[i]));
    }
    return d;
}

regression::Design engel_design(std::span<const HouseholdRecord> records, std::span<const double> total,
                                const CovariateSpec& spec) {
    regression::Design d;
    d.names = {"const", "ln_x", "ln_x_sq"};
    for (auto& n : spec.names()) d.names.push_back(n);
    d.x.resize(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(d.names.size()));
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!(total[i] > 0.0))
            throw DataError(kModule, "record '" + records[i].id + "' has nonpositive total expenditure");
        const double l = std::log(total[i]);
        fill_row(d, static_cast<Eigen::Index>(i), {1.0, l, l * l}, spec.values(records[i]));
    }
    return d;
}

std::uint64_t record_seed(std::uint64_t run_seed, const std::string& id) { return splitmix64(run_seed ^ fnv1a(id)); }

std::uint64_t stream_seed(std::uint64_t record_seed, std::uint64_t stream) {
    return splitmix64(record_seed + 0x632be59bd9b4e019ULL * (stream + 1));
}

std::vector<double> impute_total_expenditure(std::span<const HouseholdRecord> records,
                                             const regression::RegressionFit& fit, const CovariateSpec& spec,
                                             std::uint64_t seed, kernels::Execution exec) {
    const auto income = incomes_of(records, "income dataset");
    const regression::Design d = total_expenditure_design(records, income, spec);
    if (d.names != fit.names)
        throw DataError(kModule, "total expenditure fit does not match the covariate specification");
    std::vector<double> out(records.size());
    kernels::for_each_index(records.size(), exec, [&](std::size_t i) {
        const double e = normal_draw(stream_seed(record_seed(seed, records[i].id), 0), fit.residual_mean,
                                     fit.residual_variance);
        out[i] = std::exp(fit.predict(d.x.row(static_cast<Eigen::Index>(i))) + e);
    });
    return out;
}

std::vector<int> impute_participation(std::span<const double> probability, std::span<const double> weights,
                                      double target_share) {
    if (probability.size() != weights.size()) throw DataError(kModule, "probabilities and weights differ in length");
    if (!(target_share >= 0.0 && target_share <= 1.0)) throw DataError(kModule, "target share must lie in [0, 1]");
    std::vector<std::size_t> order(probability.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return probability[a] > probability[b]; });
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    const double target = target_share * total;
    const double slack = 1e-9 * total;
    std::vector<int> out(probability.size(), 0);
    double cum = 0.0;
    for (std::size_t i : order) {
        if (!(cum < target - slack)) break;
        out[i] = 1;
        cum += weights[i];
    }
    return out;
}

std::vector<double> impute_budget_shares(std::span<const double> predicted, std::span<const int> indicator,
                                         const std::string& record_id) {
    if (predicted.size() != indicator.size()) throw DataError(kModule, "predictions and indicators differ in length");
    std::vector<double> w(predicted.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (indicator[i] == 1) w[i] = std::max(0.0, predicted[i]);
        total += w[i];
    }
    if (!(total > 0.0))
        throw DataError(kModule, "record '" + record_id + "' has no positive imputed budget share (empty basket)");
    for (auto& v : w) v /= total;
    return w;
}

ImputationModel estimate_model(std::span<const HouseholdRecord> survey, std::span<const HouseholdRecord> income_data,
                               const ImputationOptions& options) {
    if (survey.empty()) throw DataError(kModule, "survey is empty");
    ImputationModel m;
    m.covariates = options.covariates;

    const auto target = mean_sd(incomes_of(income_data, "income dataset"));
    m.calibration = calibrate_income(incomes_of(survey, "survey"), target.first, target.second);
    std::vector<double> income = m.calibration.values;
    for (auto& y : income)
        if (y < options.min_income) {
            y = options.min_income;
            ++m.floored_incomes;
        }
    if (m.floored_incomes > 0)
        log::warn(std::to_string(m.floored_incomes) + " calibrated incomes below the minimum were raised to it");

    std::vector<double> weights, log_total, total;
    for (const auto& h : survey) {
        weights.push_back(h.weight);
        total.push_back(h.total_expenditure());
        log_total.push_back(std::log(total.back()));
    }
    m.total = regression::wls_fit(total_expenditure_design(survey, income, m.covariates), log_total, weights);

    const regression::Design engel = engel_design(survey, total, m.covariates);
    const std::size_t n_cat = survey.front().expenditure.size();
    const double weight_total = std::accumulate(weights.begin(), weights.end(), 0.0);
    m.target_share.assign(n_cat, 0.0);
    m.participation.resize(n_cat);
    m.shares.resize(n_cat);
    for (std::size_t c = 0; c < n_cat; ++c) {
        std::vector<double> d(survey.size());
        std::vector<Eigen::Index> buyers;
        double wpos = 0.0;
        for (std::size_t h = 0; h < survey.size(); ++h) {
            d[h] = survey[h].expenditure[c] > 0.0 ? 1.0 : 0.0;
            if (d[h] > 0.0) {
                wpos += weights[h];
                buyers.push_back(static_cast<Eigen::Index>(h));
            }
        }
        m.target_share[c] = wpos / weight_total;
        if (buyers.empty()) continue;
        if (buyers.size() < survey.size()) m.participation[c] = regression::binary_fit(engel, d, weights, options.link);

        regression::Design sub;
        sub.names = engel.names;
        sub.x.resize(static_cast<Eigen::Index>(buyers.size()), engel.x.cols());
        std::vector<double> y, w;
        for (std::size_t k = 0; k < buyers.size(); ++k) {
            const auto h = static_cast<std::size_t>(buyers[k]);
            sub.x.row(static_cast<Eigen::Index>(k)) = engel.x.row(buyers[k]);
            y.push_back(survey[h].expenditure[c] / total[h]);
            w.push_back(weights[h]);
        }
        if (buyers.size() > sub.names.size()) {
            try {
                m.shares[c] = regression::wls_fit(sub, y, w);
            } catch (const regression::RankDeficientError&) {
            }
        }
        if (!m.shares[c]) m.shares[c] = constant_fit(sub, y, w);
    }
    return m;
}

ImputationResult impute(std::span<const HouseholdRecord> survey, std::span<const HouseholdRecord> income_data,
                        const ImputationOptions& options) {
    ImputationResult r;
    r.model = estimate_model(survey, income_data, options);
    const ImputationModel& m = r.model;
    const std::size_t n = income_data.size();
    const std::size_t n_cat = m.target_share.size();

    const auto total = impute_total_expenditure(income_data, m.total, m.covariates, options.seed, options.exec);
    const regression::Design engel = engel_design(income_data, total, m.covariates);
    r.seeds.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.seeds[i] = record_seed(options.seed, income_data[i].id);

    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) weights[i] = income_data[i].weight;

    // indicator[i][c]
    std::vector<std::vector<int>> indicator(n, std::vector<int>(n_cat, 0));
    for (std::size_t c = 0; c < n_cat; ++c) {
        if (m.target_share[c] == 0.0) continue;
        std::vector<double> prob(n, 1.0);
        if (m.participation[c])
            for (std::size_t i = 0; i < n; ++i) prob[i] = m.participation[c]->probability(engel.x.row(static_cast<Eigen::Index>(i)));
        const auto d = impute_participation(prob, weights, m.target_share[c]);
        for (std::size_t i = 0; i < n; ++i) indicator[i][c] = d[i];
    }

    r.records.resize(n);
    std::vector<std::size_t> floored(n, 0);
    kernels::for_each_index(n, options.exec, [&](std::size_t i) {
        std::vector<double> predicted(n_cat, 0.0);
        const Eigen::RowVectorXd row = engel.x.row(static_cast<Eigen::Index>(i));
        for (std::size_t c = 0; c < n_cat; ++c) {
            if (!m.shares[c]) continue;
            const auto& fit = *m.shares[c];
            predicted[c] = fit.predict(row) +
                           normal_draw(stream_seed(r.seeds[i], 1 + c), fit.residual_mean, fit.residual_variance);
        }
        const auto w = impute_budget_shares(predicted, indicator[i], income_data[i].id);
        for (std::size_t c = 0; c < n_cat; ++c) floored[i] += indicator[i][c] == 1 && w[c] == 0.0;
        HouseholdRecord h = income_data[i];
        h.expenditure.assign(n_cat, 0.0);
        for (std::size_t c = 0; c < n_cat; ++c) h.expenditure[c] = w[c] * total[i];
        r.records[i] = std::move(h);
    });
    r.floored_participants = std::accumulate(floored.begin(), floored.end(), std::size_t{0});
    if (r.floored_participants > 0)
        log::info(std::to_string(r.floored_participants) + " participating categories had negative predicted shares floored to zero");
    r.participation = std::move(indicator);
    return r;
}

std::vector<ExtraColumn> provenance_columns(const ImputationResult& result) {
    ExtraColumn flag{"imp_flag", {}}, seed{"imp_seed", {}}, version{"imp_model_version", {}};
    for (std::size_t i = 0; i < result.records.size(); ++i) {
        flag.values.push_back("1");
        seed.values.push_back(std::to_string(result.seeds[i]));
        version.values.push_back(kModelVersion);
    }
    return {flag, seed, version};
}

}  // namespace prices::imputation
