#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace prices::dist {

enum class EquivalenceScale { none, per_capita, square_root };

/// "none", "per_capita" or "sqrt"; throws DataError otherwise.
EquivalenceScale parse_scale(const std::string& tag);
std::string to_string(EquivalenceScale scale);

double equivalise(double expenditure, int household_size, EquivalenceScale scale);

/// Group index in [0, k) per record. Records are sorted by value; a record
/// belongs to the group containing the cumulative weight before it, and a
/// block of tied values takes the group of its first member.
std::vector<std::size_t> weighted_quantile_groups(std::span<const double> values, std::span<const double> weights,
                                                  std::size_t k);

/// 2 cov_w(y, F) / mean(y) with F the weighted mid-rank of y.
double gini(std::span<const double> values, std::span<const double> weights);

/// Same as gini but ranking households by rank_key. Households tied on the
/// key share the mid-rank of their block.
double concentration(std::span<const double> values, std::span<const double> weights,
                     std::span<const double> rank_key);

double weighted_mean(std::span<const double> values, std::span<const double> weights);

struct WelfareWeights {
    std::vector<double> theta;
    double mean = 0.0;
};

/// theta = (x / xbar)^-epsilon with xbar the weighted mean of x.
WelfareWeights welfare_weights(std::span<const double> x, std::span<const double> weights, double epsilon);

/// sum_h w theta x_i / (theta_bar sum_h w x_i)
double distributional_characteristic(std::span<const double> theta, double theta_mean,
                                     std::span<const double> consumption, std::span<const double> weights);

struct HouseholdInflation {
    double rate = 0.0;
    double burden = 0.0;
    std::vector<double> contribution;  // w_g * pi_g
};

HouseholdInflation household_inflation(std::span<const double> shares, std::span<const double> relatives,
                                       double total = 1.0);

struct ProgressivityRow {
    std::string name;
    double ci_pre = 0.0;
    double ci_burden = 0.0;
    double ci_adjusted = 0.0;
    double rs = 0.0;
    double k = 0.0;
    double avg_rate = 0.0;
    double reranking = 0.0;
    double contribution_to_k = 0.0;
};

/// Total row first, then one row per group. burden[g][h] is household h's
/// burden from group g.
std::vector<ProgressivityRow> progressivity_table(std::span<const double> x_pre,
                                                  const std::vector<std::vector<double>>& burden,
                                                  std::span<const double> weights,
                                                  const std::vector<std::string>& group_names);

struct AtkinsonResult {
    double index = 0.0;
    double mean = 0.0;
    double yede = 0.0;
};

AtkinsonResult atkinson(std::span<const double> values, std::span<const double> weights, double epsilon);

struct WelfareDecomposition {
    double equity = 0.0;
    double efficiency = 0.0;
    double interaction = 0.0;
    double total = 0.0;
};

WelfareDecomposition welfare_decomposition(const AtkinsonResult& pre, const AtkinsonResult& post);

}  // namespace prices::dist
