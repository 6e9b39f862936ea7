#include "prices/io_engine.hpp"

#include <cmath>

#include "prices/csv.hpp"
#include "prices/error.hpp"

namespace prices::io {

namespace {

constexpr const char* kModule = "io-engine";

std::string sector_name(const std::vector<std::string>& sectors, Eigen::Index j) {
    if (j < static_cast<Eigen::Index>(sectors.size())) return "'" + sectors[static_cast<std::size_t>(j)] + "'";
    return "#" + std::to_string(j + 1);
}

}  // namespace

TechnologyMatrix TechnologyMatrix::from_coefficients(Eigen::MatrixXd a, std::vector<std::string> sectors) {
    if (a.rows() != a.cols()) throw DataError(kModule, "technology matrix must be square");
    if ((a.array() < 0.0).any()) throw DataError(kModule, "technology matrix has a negative coefficient");
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const double s = a.col(j).sum();
        if (!(s < 1.0))
            throw DataError(kModule, "non-productive economy: input coefficients of sector " +
                                              sector_name(sectors, j) + " sum to " + csv::format_exact(s));
    }
    return {std::move(a), std::move(sectors)};
}

TechnologyMatrix technology_matrix(const MrioTable& table) {
    Eigen::MatrixXd a = table.flows;
    for (Eigen::Index j = 0; j < a.cols(); ++j) a.col(j) /= table.output(j);
    return TechnologyMatrix::from_coefficients(std::move(a), table.sectors);
}

LeontiefInverse leontief_inverse(const TechnologyMatrix& a, LeontiefMethod method, NeumannOptions options,
                                 kernels::Execution exec) {
    const Eigen::Index n = a.size();
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
    LeontiefInverse out;
    out.method = method;

    if (method == LeontiefMethod::direct) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(identity - a.coefficients);
        if (!lu.isInvertible()) throw NumericalError(kModule, "I - A is singular");
        out.matrix = lu.solve(identity);
        out.terms = 0;
        return out;
    }

    out.matrix = identity;
    Eigen::MatrixXd term = identity;
    for (int k = 1; k <= options.max_terms; ++k) {
        term = kernels::matmul(a.coefficients, term, exec);
        out.matrix += term;
        out.terms = k;
        out.last_term_norm = term.cwiseAbs().maxCoeff();
        if (out.last_term_norm < options.tolerance) return out;
        if (!std::isfinite(out.last_term_norm)) break;
    }
    throw NumericalError(kModule, "Neumann series did not converge within " + std::to_string(options.max_terms) +
                                      " terms; last term max-norm " + csv::format_exact(out.last_term_norm));
}

Eigen::VectorXd cost_passthrough(const LeontiefInverse& l, const Eigen::VectorXd& shock, double rate,
                                 kernels::Execution exec) {
    if (shock.size() != l.size())
        throw DataError(kModule, "cost shock has length " + std::to_string(shock.size()) + ", expected " +
                                     std::to_string(l.size()));
    if (!(rate >= 0.0 && rate <= 1.0)) throw DataError(kModule, "pass-through rate outside [0,1]");
    return rate * kernels::transposed_apply(l.matrix, shock, exec);
}

CarbonIntensity sector_intensity(const MrioTable& table) {
    CarbonIntensity s;
    s.total = table.emissions.cwiseQuotient(table.output);
    s.domestic = s.total;
    s.imported = Eigen::VectorXd::Zero(s.total.size());
    for (std::size_t i = 0; i < table.origin.size(); ++i) {
        if (table.origin[i] == Origin::imported) {
            const auto ii = static_cast<Eigen::Index>(i);
            s.imported(ii) = s.total(ii);
            s.domestic(ii) = 0.0;
        }
    }
    return s;
}

double energy_industry_intensity(const FuelTable& fuels, std::span<const std::pair<std::string, double>> mix) {
    double weight_sum = 0.0;
    double kg_per_currency = 0.0;
    for (const auto& [name, weight] : mix) {
        const Fuel* f = fuels.find(name);
        if (!f) throw DataError(kModule, "fuel mix names unknown fuel '" + name + "'");
        if (!(f->price > 0.0)) throw DataError(kModule, "fuel '" + name + "' has zero price");
        if (weight < 0.0) throw DataError(kModule, "negative fuel mix weight");
        weight_sum += weight;
        kg_per_currency += weight * (f->kgco2_per_unit / f->price);
    }
    if (std::abs(weight_sum - 1.0) > 1e-9) throw DataError(kModule, "fuel mix weights must sum to 1");
    return kg_per_currency / 1000.0;
}

CarbonIntensity embodied_intensity(const LeontiefInverse& l, const CarbonIntensity& s, kernels::Execution exec) {
    if (s.total.size() != l.size()) throw DataError(kModule, "intensity vector does not match the Leontief inverse");
    CarbonIntensity m;
    m.domestic = kernels::transposed_apply(l.matrix, s.domestic, exec);
    m.imported = kernels::transposed_apply(l.matrix, s.imported, exec);
    m.total = kernels::transposed_apply(l.matrix, s.total, exec);
    return m;
}

Eigen::VectorXd bridge_to_industry(const BridgingMatrix& b, std::span<const double> category_vector) {
    if (static_cast<Eigen::Index>(category_vector.size()) != b.shares.rows())
        throw DataError(kModule, "category vector does not match the bridging matrix");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(b.shares.cols());
    for (Eigen::Index i = 0; i < b.shares.rows(); ++i) out += category_vector[static_cast<std::size_t>(i)] * b.shares.row(i).transpose();
    return out;
}

Eigen::VectorXd bridge_to_categories(const BridgingMatrix& b, const Eigen::VectorXd& per_product) {
    if (per_product.size() != b.shares.cols())
        throw DataError(kModule, "product vector does not match the bridging matrix");
    return b.shares * per_product;
}

FootprintModel make_footprint_model(const BridgingMatrix& b, const Eigen::VectorXd& embodied_per_product,
                                    const FuelTable& fuels, const std::map<std::string, std::string>& direct_map,
                                    const CategorySet& categories) {
    if (b.shares.rows() != static_cast<Eigen::Index>(categories.size()))
        throw DataError(kModule, "bridging matrix rows do not match the category set");
    FootprintModel m;
    m.category_intensity = bridge_to_categories(b, embodied_per_product);
    m.direct_fuel.assign(categories.size(), std::nullopt);
    for (const auto& [cat, fuel] : direct_map) {
        const auto ci = categories.index_of(cat);
        if (!ci) throw DataError(kModule, "direct fuel map names unknown category '" + cat + "'");
        const Fuel* f = fuels.find(fuel);
        if (!f) throw DataError(kModule, "direct fuel map names fuel '" + fuel + "' missing from the fuel table");
        m.direct_fuel[*ci] = *f;
    }
    return m;
}

Footprint household_footprint(std::span<const double> expenditure, const FootprintModel& model) {
    if (static_cast<Eigen::Index>(expenditure.size()) != model.category_intensity.size())
        throw DataError(kModule, "expenditure vector does not match the footprint model");
    Footprint fp;
    for (std::size_t c = 0; c < expenditure.size(); ++c) {
        fp.indirect += expenditure[c] * model.category_intensity(static_cast<Eigen::Index>(c));
        if (const auto& f = model.direct_fuel[c]) fp.direct += expenditure[c] / f->price * f->kgco2_per_unit / 1000.0;
    }
    fp.total = fp.direct + fp.indirect;
    return fp;
}

}  // namespace prices::io
