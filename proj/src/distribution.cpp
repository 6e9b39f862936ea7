#include "prices/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "prices/error.hpp"
#include "prices/kernels.hpp"

namespace prices::dist {

namespace {

constexpr const char* kModule = "distribution-metrics";

double check_sample(std::span<const double> values, std::span<const double> weights) {
    if (values.size() != weights.size()) throw DataError(kModule, "values and weights differ in length");
    for (double w : weights)
        if (!(w >= 0.0) || !std::isfinite(w)) throw DataError(kModule, "weights must be finite and >= 0");
    const double total = kernels::sum(weights);
    if (!(total > 0.0)) throw DataError(kModule, "total weight must be positive");
    return total;
}

std::vector<std::size_t> sorted_order(std::span<const double> key) {
    std::vector<std::size_t> order(key.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
    return order;
}

}  // namespace

EquivalenceScale parse_scale(const std::string& tag) {
    if (tag == "none") return EquivalenceScale::none;
    if (tag == "per_capita") return EquivalenceScale::per_capita;
    if (tag == "sqrt") return EquivalenceScale::square_root;
    throw DataError(kModule, "unknown equivalence scale '" + tag + "' (expected none, per_capita or sqrt)");
}

std::string to_string(EquivalenceScale scale) {
    switch (scale) {
        case EquivalenceScale::none: return "none";
        case EquivalenceScale::per_capita: return "per_capita";
        case EquivalenceScale::square_root: return "sqrt";
    }
    return "none";
}

double equivalise(double expenditure, int household_size, EquivalenceScale scale) {
    if (household_size < 1) throw DataError(kModule, "household size must be >= 1");
    switch (scale) {
        case EquivalenceScale::none: return expenditure;
        case EquivalenceScale::per_capita: return expenditure / household_size;
        case EquivalenceScale::square_root: return expenditure / std::sqrt(static_cast<double>(household_size));
    }
    return expenditure;
}

std::vector<std::size_t> weighted_quantile_groups(std::span<const double> values, std::span<const double> weights,
                                                  std::size_t k) {
    if (k < 2) throw DataError(kModule, "need at least two quantile groups");
    const double total = check_sample(values, weights);
    const auto order = sorted_order(values);
    std::vector<std::size_t> group(values.size(), 0);
    double cum = 0.0;
    std::size_t block_group = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        const std::size_t i = order[r];
        if (r == 0 || values[i] != values[order[r - 1]]) {
            const double pos = cum * static_cast<double>(k) / total + 1e-9;
            block_group = std::min(k - 1, static_cast<std::size_t>(std::floor(pos)));
        }
        group[i] = block_group;
        cum += weights[i];
    }
    return group;
}

double weighted_mean(std::span<const double> values, std::span<const double> weights) {
    const double total = check_sample(values, weights);
    return kernels::weighted_sum(weights, values) / total;
}

double concentration(std::span<const double> values, std::span<const double> weights,
                     std::span<const double> rank_key) {
    const double total = check_sample(values, weights);
    if (rank_key.size() != values.size()) throw DataError(kModule, "rank key differs in length");
    const double mean = kernels::weighted_sum(weights, values) / total;
    if (mean == 0.0) throw DataError(kModule, "concentration index undefined for a zero mean");

    const auto order = sorted_order(rank_key);
    std::vector<double> rank(values.size());
    double cum = 0.0;
    for (std::size_t r = 0; r < order.size();) {
        std::size_t end = r;
        double block = 0.0;
        while (end < order.size() && rank_key[order[end]] == rank_key[order[r]]) block += weights[order[end++]];
        const double mid = (cum + 0.5 * block) / total;
        for (std::size_t q = r; q < end; ++q) rank[order[q]] = mid;
        cum += block;
        r = end;
    }
    const double rank_mean = kernels::weighted_sum(weights, rank) / total;
    std::vector<double> prod(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) prod[i] = (values[i] - mean) * (rank[i] - rank_mean);
    return 2.0 * (kernels::weighted_sum(weights, prod) / total) / mean;
}

double gini(std::span<const double> values, std::span<const double> weights) {
    for (double v : values)
        if (v < 0.0) throw DataError(kModule, "Gini requires nonnegative values");
    return concentration(values, weights, values);
}

WelfareWeights welfare_weights(std::span<const double> x, std::span<const double> weights, double epsilon) {
    if (!(epsilon >= 0.0)) throw DataError(kModule, "inequality aversion must be >= 0");
    for (double v : x)
        if (!(v > 0.0)) throw DataError(kModule, "welfare weights need positive expenditure");
    const double xbar = weighted_mean(x, weights);
    WelfareWeights out;
    out.theta.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out.theta[i] = epsilon == 0.0 ? 1.0 : std::pow(x[i] / xbar, -epsilon);
    out.mean = weighted_mean(out.theta, weights);
    return out;
}

double distributional_characteristic(std::span<const double> theta, double theta_mean,
                                     std::span<const double> consumption, std::span<const double> weights) {
    check_sample(consumption, weights);
    if (theta.size() != consumption.size()) throw DataError(kModule, "welfare weights differ in length");
    if (!(theta_mean > 0.0)) throw DataError(kModule, "mean welfare weight must be positive");
    // Spending mass w x_i weighted by theta_i / theta_bar.
    std::vector<double> mass(theta.size()), rel(theta.size()), ones(theta.size(), 1.0);
    for (std::size_t i = 0; i < mass.size(); ++i) {
        mass[i] = weights[i] * consumption[i];
        rel[i] = theta[i] / theta_mean;
    }
    const double denom = kernels::weighted_sum(mass, ones);
    if (!(denom > 0.0)) throw DataError(kModule, "zero aggregate consumption of the good");
    return kernels::weighted_sum(mass, rel) / denom;
}

HouseholdInflation household_inflation(std::span<const double> shares, std::span<const double> relatives,
                                       double total) {
    if (shares.size() != relatives.size()) throw DataError(kModule, "shares and rates differ in length");
    HouseholdInflation out;
    out.contribution.resize(shares.size());
    for (std::size_t g = 0; g < shares.size(); ++g) out.contribution[g] = shares[g] * relatives[g];
    out.rate = kernels::sum(out.contribution);
    out.burden = out.rate * total;
    return out;
}

std::vector<ProgressivityRow> progressivity_table(std::span<const double> x_pre,
                                                  const std::vector<std::vector<double>>& burden,
                                                  std::span<const double> weights,
                                                  const std::vector<std::string>& group_names) {
    check_sample(x_pre, weights);
    if (burden.size() != group_names.size()) throw DataError(kModule, "burden groups and names differ in length");
    const std::size_t n = x_pre.size();
    for (const auto& b : burden)
        if (b.size() != n) throw DataError(kModule, "burden vector differs in length from expenditure");

    const double g_pre = gini(x_pre, weights);
    const double sum_x = kernels::weighted_sum(weights, x_pre);

    auto adjusted = [&](const std::vector<double>& b) {
        std::vector<double> out(n);
        for (std::size_t h = 0; h < n; ++h) out[h] = x_pre[h] / (1.0 + b[h] / x_pre[h]);
        return out;
    };

    std::vector<double> total_burden(n, 0.0);
    for (std::size_t h = 0; h < n; ++h) {
        std::vector<double> parts(burden.size());
        for (std::size_t g = 0; g < burden.size(); ++g) parts[g] = burden[g][h];
        total_burden[h] = kernels::sum(parts);
    }

    std::vector<ProgressivityRow> rows;
    {
        ProgressivityRow t;
        t.name = "Total Expenditure";
        t.ci_pre = g_pre;
        t.avg_rate = kernels::weighted_sum(weights, total_burden) / sum_x;
        if (t.avg_rate != 0.0) {
            t.ci_burden = concentration(total_burden, weights, x_pre);
            t.k = t.ci_burden - g_pre;
        } else {
            t.ci_burden = std::numeric_limits<double>::quiet_NaN();
        }
        const auto real = adjusted(total_burden);
        const double g_post = gini(real, weights);
        t.ci_adjusted = concentration(real, weights, x_pre);
        t.rs = g_pre - g_post;
        t.reranking = g_post - t.ci_adjusted;
        t.contribution_to_k = 1.0;
        rows.push_back(t);
    }
    std::vector<double> rk(burden.size());
    for (std::size_t g = 0; g < burden.size(); ++g) {
        ProgressivityRow r;
        r.name = group_names[g];
        r.ci_pre = g_pre;
        r.avg_rate = kernels::weighted_sum(weights, burden[g]) / sum_x;
        if (r.avg_rate != 0.0) {
            r.ci_burden = concentration(burden[g], weights, x_pre);
            r.k = r.ci_burden - g_pre;
        } else {
            r.ci_burden = std::numeric_limits<double>::quiet_NaN();
            r.k = 0.0;
        }
        const auto real = adjusted(burden[g]);
        r.ci_adjusted = concentration(real, weights, x_pre);
        r.rs = r.ci_adjusted - g_pre;
        r.reranking = gini(real, weights) - r.ci_adjusted;
        rk[g] = r.avg_rate * r.k;
        rows.push_back(r);
    }
    const double rk_sum = kernels::sum(rk);
    for (std::size_t g = 0; g < burden.size(); ++g)
        rows[g + 1].contribution_to_k = rk_sum != 0.0 ? rk[g] / rk_sum : std::numeric_limits<double>::quiet_NaN();
    return rows;
}

AtkinsonResult atkinson(std::span<const double> values, std::span<const double> weights, double epsilon) {
    const double total = check_sample(values, weights);
    if (!(epsilon >= 0.0)) throw DataError(kModule, "inequality aversion must be >= 0");
    for (double v : values)
        if (!(v > 0.0)) throw DataError(kModule, "Atkinson index needs strictly positive values");
    AtkinsonResult r;
    r.mean = kernels::weighted_sum(weights, values) / total;
    std::vector<double> t(values.size());
    double ede;
    if (epsilon == 1.0) {
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::log(values[i]);
        ede = std::exp(kernels::weighted_sum(weights, t) / total);
    } else {
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::pow(values[i], 1.0 - epsilon);
        ede = std::pow(kernels::weighted_sum(weights, t) / total, 1.0 / (1.0 - epsilon));
    }
    r.index = 1.0 - ede / r.mean;
    r.yede = r.mean * (1.0 - r.index);
    return r;
}

WelfareDecomposition welfare_decomposition(const AtkinsonResult& pre, const AtkinsonResult& post) {
    if (pre.mean == 0.0 || pre.index == 1.0) throw DataError(kModule, "pre-change welfare must be nonzero");
    WelfareDecomposition d;
    d.equity = ((1.0 - post.index) - (1.0 - pre.index)) / (1.0 - pre.index);
    d.efficiency = (post.mean - pre.mean) / pre.mean;
    d.interaction = d.equity * d.efficiency;
    d.total = d.equity + d.efficiency + d.interaction;
    return d;
}

}  // namespace prices::dist
