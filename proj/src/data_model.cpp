#include "prices/data_model.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "prices/csv.hpp"
#include "prices/error.hpp"

namespace prices {

namespace {

constexpr const char* kModule = "data-model";

[[noreturn]] void fail(const std::string& msg) { throw DataError(kModule, msg); }

std::string cell_location(const csv::Table& t, std::size_t row, std::size_t col) {
    return t.source + ": line " + std::to_string(row + 2) + ", column '" + t.header[col] + "'";
}

}  // namespace

// ---------------------------------------------------------------------------
// CategorySet

CategorySet::CategorySet(std::vector<Category> categories) : items_(std::move(categories)) {
    std::set<std::string> seen;
    for (const auto& c : items_) {
        if (c.id.empty()) fail("category identifiers must be non-empty");
        if (!seen.insert(c.id).second) fail("duplicate category identifier '" + c.id + "'");
    }
}

CategorySet CategorySet::canonical() {
    return CategorySet({
        {"food", "Food and Non-alcoholic beverages"},
        {"alcohol", "Alcoholic beverages"},
        {"tobacco", "Tobacco"},
        {"clothing", "Clothing and footwear"},
        {"domestic_energy", "Domestic Energy"},
        {"electricity", "Electricity"},
        {"rents", "Rents"},
        {"household_services", "Household services"},
        {"health", "Health"},
        {"private_transport", "Private transport"},
        {"public_transport", "Public transport"},
        {"communication", "Communication"},
        {"recreation", "Recreation and culture"},
        {"education", "Education"},
        {"restaurants", "Restaurants and hotels"},
        {"other", "Other goods and services"},
        {"childcare", "Childcare costs"},
        {"motor_fuels", "Motor fuels"},
        {"durables", "Durables"},
    });
}

CategorySet CategorySet::from_ids(const std::vector<std::string>& ids) {
    std::vector<Category> cats;
    cats.reserve(ids.size());
    for (const auto& id : ids) cats.push_back({id, id});
    return CategorySet(std::move(cats));
}

std::optional<std::size_t> CategorySet::index_of(const std::string& id) const {
    for (std::size_t i = 0; i < items_.size(); ++i)
        if (items_[i].id == id) return i;
    return std::nullopt;
}

std::size_t CategorySet::require(const std::string& id) const {
    if (auto i = index_of(id)) return *i;
    fail("unknown category '" + id + "'");
}

bool CategorySet::operator==(const CategorySet& o) const {
    if (size() != o.size()) return false;
    for (std::size_t i = 0; i < size(); ++i)
        if (items_[i].id != o.items_[i].id) return false;
    return true;
}

ExpenditureGroups ExpenditureGroups::summary(const CategorySet& categories) {
    ExpenditureGroups g;
    g.names = {"Food", "Motor Fuels", "Domestic Energy and Electricity", "Other Goods and Services"};
    g.group_of.resize(categories.size(), 3);
    for (std::size_t i = 0; i < categories.size(); ++i) {
        const auto& id = categories[i].id;
        if (id == "food") g.group_of[i] = 0;
        else if (id == "motor_fuels") g.group_of[i] = 1;
        else if (id == "domestic_energy" || id == "electricity") g.group_of[i] = 2;
    }
    return g;
}

ExpenditureGroups ExpenditureGroups::identity(const CategorySet& categories) {
    ExpenditureGroups g;
    for (std::size_t i = 0; i < categories.size(); ++i) {
        g.names.push_back(categories[i].label);
        g.group_of.push_back(i);
    }
    return g;
}

// ---------------------------------------------------------------------------
// HouseholdRecord

double HouseholdRecord::total_expenditure() const {
    return std::accumulate(expenditure.begin(), expenditure.end(), 0.0);
}

std::vector<double> HouseholdRecord::budget_shares() const {
    const double total = total_expenditure();
    std::vector<double> w(expenditure.size(), 0.0);
    if (total <= 0.0) return w;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = expenditure[i] / total;
    return w;
}

// ---------------------------------------------------------------------------
// Household survey CSV

SurveyLoad parse_household_survey(const std::string& text, const CategorySet& categories,
                                  SurveyLoadOptions options, const std::string& source) {
    const csv::Table t = csv::parse(text, source);
    csv::require_unique_header(t);

    const std::size_t id_col = t.require("id");
    const std::size_t weight_col = t.require("weight");
    const std::size_t size_col = t.require("size");
    const auto inc_col = t.find("inc");

    std::vector<std::optional<std::size_t>> exp_cols(categories.size());
    for (std::size_t c = 0; c < categories.size(); ++c) {
        const std::string name = "exp_" + categories[c].id;
        exp_cols[c] = t.find(name);
        if (!exp_cols[c] && options.require_expenditure) t.require(name);
    }

    std::vector<std::pair<std::string, std::size_t>> demo_cols;
    SurveyLoad out;
    for (std::size_t j = 0; j < t.header.size(); ++j) {
        const auto& h = t.header[j];
        if (h.rfind("demo_", 0) == 0) {
            demo_cols.emplace_back(h.substr(5), j);
            continue;
        }
        bool known = j == id_col || j == weight_col || j == size_col || (inc_col && j == *inc_col);
        for (const auto& ec : exp_cols) known = known || (ec && *ec == j);
        if (!known) out.report.ignored_columns.push_back(h);
    }

    std::set<std::string> ids;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        ++out.report.rows_read;
        HouseholdRecord h;
        h.id = t.rows[r][id_col];
        if (h.id.empty()) fail(cell_location(t, r, id_col) + ": empty household id");
        if (!ids.insert(h.id).second) fail(cell_location(t, r, id_col) + ": duplicate household id '" + h.id + "'");

        h.weight = t.number(r, weight_col);
        if (h.weight < 0.0) fail(cell_location(t, r, weight_col) + ": negative weight");
        const double size = t.number(r, size_col);
        if (size < 1.0 || size != std::floor(size))
            fail(cell_location(t, r, size_col) + ": household size must be an integer >= 1");
        h.size = static_cast<int>(size);

        if (inc_col) h.disposable_income = t.number(r, *inc_col);
        for (const auto& [name, col] : demo_cols) h.demographics[name] = t.number(r, col);

        h.expenditure.assign(categories.size(), 0.0);
        for (std::size_t c = 0; c < categories.size(); ++c) {
            if (!exp_cols[c]) continue;
            const double v = t.number(r, *exp_cols[c]);
            if (v < 0.0) fail(cell_location(t, r, *exp_cols[c]) + ": negative expenditure");
            h.expenditure[c] = v;
        }

        if (options.require_expenditure && !(h.total_expenditure() > 0.0)) {
            ++out.report.dropped_zero_expenditure;
            out.report.dropped_ids.push_back(h.id);
            continue;
        }
        out.records.push_back(std::move(h));
    }
    return out;
}

SurveyLoad load_household_survey(const std::filesystem::path& path, const CategorySet& categories,
                                 SurveyLoadOptions options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open '" + path.string() + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_household_survey(text, categories, options, path.string());
}

std::string format_household_survey(std::span<const HouseholdRecord> records, const CategorySet& categories,
                                    std::span<const ExtraColumn> extra) {
    const bool has_income = std::any_of(records.begin(), records.end(),
                                        [](const HouseholdRecord& h) { return h.disposable_income.has_value(); });
    std::set<std::string> demo_names;
    for (const auto& h : records)
        for (const auto& [k, v] : h.demographics) demo_names.insert(k);

    std::vector<std::string> header = {"id", "weight", "size"};
    if (has_income) header.push_back("inc");
    for (const auto& d : demo_names) header.push_back("demo_" + d);
    for (const auto& c : categories.items()) header.push_back("exp_" + c.id);
    for (const auto& e : extra) header.push_back(e.name);

    csv::Writer w(header);
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& h = records[r];
        std::vector<std::string> row = {h.id, csv::format_exact(h.weight), std::to_string(h.size)};
        if (has_income) {
            if (!h.disposable_income) fail("record '" + h.id + "' lacks income while others have it");
            row.push_back(csv::format_exact(*h.disposable_income));
        }
        for (const auto& d : demo_names) {
            auto it = h.demographics.find(d);
            if (it == h.demographics.end()) fail("record '" + h.id + "' lacks demographic '" + d + "'");
            row.push_back(csv::format_exact(it->second));
        }
        for (double e : h.expenditure) row.push_back(csv::format_exact(e));
        for (const auto& e : extra) row.push_back(e.values.at(r));
        w.add_row(std::move(row));
    }
    return w.str();
}

void write_household_survey(const std::filesystem::path& path, std::span<const HouseholdRecord> records,
                            const CategorySet& categories, std::span<const ExtraColumn> extra) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write '" + path.string() + "'");
    out << format_household_survey(records, categories, extra);
}

// ---------------------------------------------------------------------------
// MRIO

double MrioTable::identity_residual() const {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < output.size(); ++i) {
        const double r = std::abs(output(i) - flows.row(i).sum() - final_demand(i)) / output(i);
        worst = std::max(worst, r);
    }
    return worst;
}

void MrioTable::validate(double relative_tolerance) const {
    const auto n = static_cast<Eigen::Index>(sectors.size());
    if (flows.rows() != n || flows.cols() != n)
        fail("MRIO: flow matrix is " + std::to_string(flows.rows()) + "x" + std::to_string(flows.cols()) +
             " but there are " + std::to_string(n) + " sectors");
    if (final_demand.size() != n) fail("MRIO: final demand has length " + std::to_string(final_demand.size()) +
                                       ", expected " + std::to_string(n));
    if (output.size() != n)
        fail("MRIO: output has length " + std::to_string(output.size()) + ", expected " + std::to_string(n));
    if (emissions.size() != n)
        fail("MRIO: emissions has length " + std::to_string(emissions.size()) + ", expected " + std::to_string(n));
    if (origin.size() != sectors.size()) fail("MRIO: origin flags do not cover every sector");
    if ((flows.array() < 0.0).any()) fail("MRIO: negative inter-industry flow");
    if ((final_demand.array() < 0.0).any()) fail("MRIO: negative final demand");
    if ((emissions.array() < 0.0).any()) fail("MRIO: negative emissions");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(output(i) > 0.0)) fail("MRIO: output of sector '" + sectors[i] + "' is not strictly positive");

    Eigen::Index worst = -1;
    double worst_res = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double res = output(i) - flows.row(i).sum() - final_demand(i);
        if (std::abs(res) / output(i) > relative_tolerance && std::abs(res) > std::abs(worst_res)) {
            worst = i;
            worst_res = res;
        }
    }
    if (worst >= 0)
        fail("MRIO: accounting identity violated; worst sector '" + sectors[worst] + "' (index " +
             std::to_string(worst + 1) + ") residual " + csv::format_exact(worst_res));
}

MrioPaths MrioPaths::in_directory(const std::filesystem::path& dir) {
    return {dir / "mrio_z.csv", dir / "mrio_d.csv", dir / "mrio_x.csv", dir / "mrio_f.csv"};
}

namespace {

// Reads a "sector,<value>" file, checking labels against the registry.
Eigen::VectorXd read_sector_vector(const std::filesystem::path& path, const char* column,
                                   const std::vector<std::string>& sectors, csv::Table* keep = nullptr) {
    csv::Table t = csv::read(path);
    csv::require_unique_header(t);
    const std::size_t sc = t.require("sector");
    const std::size_t vc = t.require(column);
    if (t.rows.size() != sectors.size())
        fail(t.source + ": dimension mismatch, " + std::to_string(t.rows.size()) + " rows for " +
             std::to_string(sectors.size()) + " sectors");
    Eigen::VectorXd v(static_cast<Eigen::Index>(t.rows.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (t.rows[r][sc] != sectors[r])
            fail(cell_location(t, r, sc) + ": sector label '" + t.rows[r][sc] + "' does not match registry '" +
                 sectors[r] + "'");
        v(static_cast<Eigen::Index>(r)) = t.number(r, vc);
    }
    if (keep) *keep = std::move(t);
    return v;
}

}  // namespace

MrioTable load_mrio(const MrioPaths& paths, double relative_tolerance) {
    MrioTable m;
    const csv::Table z = csv::read(paths.flows);
    csv::require_unique_header(z);
    if (z.header.empty() || z.header[0] != "sector") fail(z.source + ": first column must be 'sector'");
    m.sectors.assign(z.header.begin() + 1, z.header.end());
    const auto n = static_cast<Eigen::Index>(m.sectors.size());
    if (static_cast<Eigen::Index>(z.rows.size()) != n)
        fail(z.source + ": dimension mismatch, flow matrix has " + std::to_string(z.rows.size()) + " rows and " +
             std::to_string(n) + " columns");
    m.flows.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (z.rows[i][0] != m.sectors[i])
            fail(cell_location(z, i, 0) + ": row label '" + z.rows[i][0] + "' does not match column label '" +
                 m.sectors[i] + "'");
        for (Eigen::Index j = 0; j < n; ++j) m.flows(i, j) = z.number(i, j + 1);
    }
    m.final_demand = read_sector_vector(paths.final_demand, "d", m.sectors);
    csv::Table xt;
    m.output = read_sector_vector(paths.output, "x", m.sectors, &xt);
    m.emissions = read_sector_vector(paths.emissions, "f", m.sectors);

    m.origin.assign(m.sectors.size(), Origin::domestic);
    if (auto oc = xt.find("origin")) {
        for (std::size_t r = 0; r < xt.rows.size(); ++r) {
            const auto& v = xt.rows[r][*oc];
            if (v == "imported") m.origin[r] = Origin::imported;
            else if (v != "domestic" && !v.empty())
                fail(cell_location(xt, r, *oc) + ": origin must be 'domestic' or 'imported'");
        }
    }
    m.validate(relative_tolerance);
    return m;
}

void write_mrio(const MrioTable& t, const std::filesystem::path& dir) {
    const auto paths = MrioPaths::in_directory(dir);
    std::vector<std::string> zh = {"sector"};
    zh.insert(zh.end(), t.sectors.begin(), t.sectors.end());
    csv::Writer z(zh);
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::vector<std::string> row = {t.sectors[i]};
        for (std::size_t j = 0; j < t.size(); ++j) row.push_back(csv::format_exact(t.flows(i, j)));
        z.add_row(std::move(row));
    }
    z.write(paths.flows);
    csv::Writer d({"sector", "d"}), x({"sector", "x", "origin"}), f({"sector", "f"});
    for (std::size_t i = 0; i < t.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        d.add_row({t.sectors[i], csv::format_exact(t.final_demand(ii))});
        x.add_row({t.sectors[i], csv::format_exact(t.output(ii)),
                   t.origin[i] == Origin::imported ? "imported" : "domestic"});
        f.add_row({t.sectors[i], csv::format_exact(t.emissions(ii))});
    }
    d.write(paths.final_demand);
    x.write(paths.output);
    f.write(paths.emissions);
}

// ---------------------------------------------------------------------------
// Bridge

void BridgingMatrix::validate() const {
    if (shares.rows() != static_cast<Eigen::Index>(categories.size()) ||
        shares.cols() != static_cast<Eigen::Index>(products.size()))
        fail("bridge: matrix shape does not match its labels");
    if ((shares.array() < 0.0).any()) fail("bridge: negative use share");
    for (Eigen::Index i = 0; i < shares.rows(); ++i) {
        const double s = shares.row(i).sum();
        if (std::abs(s - 1.0) > 1e-9)
            fail("bridge: row '" + categories[i] + "' sums to " + csv::format_exact(s) + ", expected 1");
    }
}

BridgingMatrix load_bridge(const std::filesystem::path& path, const CategorySet& categories) {
    const csv::Table t = csv::read(path);
    csv::require_unique_header(t);
    if (t.header.empty() || t.header[0] != "category") fail(t.source + ": first column must be 'category'");
    BridgingMatrix b;
    b.products.assign(t.header.begin() + 1, t.header.end());
    for (const auto& c : categories.items()) b.categories.push_back(c.id);
    b.shares = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(categories.size()),
                                     static_cast<Eigen::Index>(b.products.size()));
    std::vector<bool> seen(categories.size(), false);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        auto ci = categories.index_of(t.rows[r][0]);
        if (!ci) fail(cell_location(t, r, 0) + ": unknown category '" + t.rows[r][0] + "'");
        if (seen[*ci]) fail(cell_location(t, r, 0) + ": category listed twice");
        seen[*ci] = true;
        for (std::size_t j = 0; j < b.products.size(); ++j)
            b.shares(static_cast<Eigen::Index>(*ci), static_cast<Eigen::Index>(j)) = t.number(r, j + 1);
    }
    for (std::size_t c = 0; c < categories.size(); ++c)
        if (!seen[c]) fail(t.source + ": category '" + categories[c].id + "' missing");
    b.validate();
    return b;
}

void write_bridge(const BridgingMatrix& b, const std::filesystem::path& path) {
    std::vector<std::string> h = {"category"};
    h.insert(h.end(), b.products.begin(), b.products.end());
    csv::Writer w(h);
    for (std::size_t i = 0; i < b.categories.size(); ++i) {
        std::vector<std::string> row = {b.categories[i]};
        for (std::size_t j = 0; j < b.products.size(); ++j)
            row.push_back(csv::format_exact(b.shares(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
        w.add_row(std::move(row));
    }
    w.write(path);
}

// ---------------------------------------------------------------------------
// Prices, taxes, fuels

void PriceScenario::validate(std::size_t categories) const {
    if (relatives.size() != categories)
        fail("price scenario: " + std::to_string(relatives.size()) + " relatives for " + std::to_string(categories) +
             " categories");
    for (double r : relatives)
        if (!(r > -1.0)) fail("price scenario: relative " + csv::format_exact(r) + " would make a price non-positive");
    if (carbon_tax < 0.0) fail("price scenario: negative carbon tax");
    if (passthrough < 0.0 || passthrough > 1.0) fail("price scenario: pass-through rate outside [0,1]");
    if (!taxes.empty() && taxes.size() != categories) fail("price scenario: tax schedule does not cover categories");
    for (const auto& t : taxes)
        if (t.vat < 0.0 || t.advalorem < 0.0 || t.excise < 0.0 || !(t.base_price > 0.0))
            fail("price scenario: tax rates must be >= 0 and base prices > 0");
}

std::vector<double> load_prices(const std::filesystem::path& path, const CategorySet& categories) {
    const csv::Table t = csv::read(path);
    csv::require_unique_header(t);
    const std::size_t cc = t.require("category");
    const std::size_t pc = t.require("pi");
    std::vector<double> out(categories.size(), 0.0);
    std::vector<bool> seen(categories.size(), false);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        auto ci = categories.index_of(t.rows[r][cc]);
        if (!ci) fail(cell_location(t, r, cc) + ": unknown category '" + t.rows[r][cc] + "'");
        if (seen[*ci]) fail(cell_location(t, r, cc) + ": category listed twice");
        seen[*ci] = true;
        out[*ci] = t.number(r, pc);
        if (!(out[*ci] > -1.0)) fail(cell_location(t, r, pc) + ": price relative must exceed -1");
    }
    for (std::size_t c = 0; c < categories.size(); ++c)
        if (!seen[c]) fail(t.source + ": category '" + categories[c].id + "' missing");
    return out;
}

std::vector<IndirectTax> load_taxes(const std::filesystem::path& path, const CategorySet& categories) {
    const csv::Table t = csv::read(path);
    csv::require_unique_header(t);
    const std::size_t cc = t.require("category");
    const std::size_t vc = t.require("vat");
    const std::size_t ac = t.require("advalorem");
    const std::size_t ec = t.require("excise");
    const auto bc = t.find("base_price");
    std::vector<IndirectTax> out(categories.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        auto ci = categories.index_of(t.rows[r][cc]);
        if (!ci) fail(cell_location(t, r, cc) + ": unknown category '" + t.rows[r][cc] + "'");
        IndirectTax& x = out[*ci];
        x.vat = t.number(r, vc);
        x.advalorem = t.number(r, ac);
        x.excise = t.number(r, ec);
        if (bc) x.base_price = t.number(r, *bc);
        if (x.vat < 0.0 || x.advalorem < 0.0 || x.excise < 0.0 || !(x.base_price > 0.0))
            fail(t.source + ": line " + std::to_string(r + 2) + ": rates must be >= 0 and base_price > 0");
    }
    return out;
}

const Fuel* FuelTable::find(const std::string& name) const {
    for (const auto& f : fuels)
        if (f.name == name) return &f;
    return nullptr;
}

void FuelTable::validate() const {
    std::set<std::string> names;
    for (const auto& f : fuels) {
        if (!names.insert(f.name).second) fail("fuel table: duplicate fuel '" + f.name + "'");
        if (!(f.price > 0.0) || !(f.kgco2_per_unit > 0.0))
            fail("fuel table: '" + f.name + "' needs strictly positive price and carbon content");
    }
}

FuelTable load_fuels(const std::filesystem::path& path) {
    const csv::Table t = csv::read(path);
    csv::require_unique_header(t);
    const std::size_t fc = t.require("fuel");
    const std::size_t pc = t.require("price");
    const std::size_t kc = t.require("kgco2_per_unit");
    FuelTable out;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        out.fuels.push_back({t.rows[r][fc], t.number(r, pc), t.number(r, kc)});
    out.validate();
    return out;
}

void write_fuels(const FuelTable& f, const std::filesystem::path& path) {
    csv::Writer w({"fuel", "price", "kgco2_per_unit"});
    for (const auto& x : f.fuels)
        w.add_row({x.name, csv::format_exact(x.price), csv::format_exact(x.kgco2_per_unit)});
    w.write(path);
}

}  // namespace prices
