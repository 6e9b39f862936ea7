#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "prices/csv.hpp"
#include "prices/error.hpp"
#include "prices/fixtures.hpp"
#include "prices/imputation.hpp"
#include "prices/log.hpp"
#include "prices/scenario.hpp"

namespace {

using namespace prices;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool quiet = false;
};

scenario::RunConfig load(const Common& o) {
    auto c = scenario::load_config(o.config);
    if (o.seed) c.seed = *o.seed;
    return c;
}

std::filesystem::path output_dir(const Common& o, const scenario::RunConfig& c) {
    if (!o.out.empty()) return o.out;
    return c.resolve(c.output);
}

int cmd_validate(const Common& o) {
    const auto c = load(o);
    c.validate();
    const CategorySet cats = CategorySet::canonical();
    const auto survey = load_household_survey(c.resolve(c.households), cats);
    std::cout << "households: " << survey.records.size() << " loaded, " << survey.report.dropped_zero_expenditure
              << " dropped (zero expenditure)\n";
    for (const auto& col : survey.report.ignored_columns) std::cout << "ignored column: " << col << "\n";
    if (!c.income.empty()) {
        SurveyLoadOptions opt;
        opt.require_expenditure = false;
        std::cout << "income records: " << load_household_survey(c.resolve(c.income), cats, opt).records.size() << "\n";
    }
    if (!c.mrio.empty()) {
        const auto m = load_mrio(MrioPaths::in_directory(c.resolve(c.mrio)));
        std::cout << "mrio: " << m.size() << " sectors, identity residual " << csv::format_index(m.identity_residual())
                  << "\n";
    }
    if (!c.bridge.empty()) std::cout << "bridge: " << load_bridge(c.resolve(c.bridge), cats).products.size() << " products\n";
    if (!c.fuels.empty()) std::cout << "fuels: " << load_fuels(c.resolve(c.fuels)).fuels.size() << "\n";
    if (!c.prices.empty()) load_prices(c.resolve(c.prices), cats);
    if (!c.taxes.empty()) load_taxes(c.resolve(c.taxes), cats);
    if (!c.taxes_post.empty()) load_taxes(c.resolve(c.taxes_post), cats);
    std::cout << "config hash: " << c.hash() << "\nok\n";
    return 0;
}

int cmd_impute(const Common& o) {
    const auto c = load(o);
    c.validate();
    if (c.income.empty()) throw DataError("scenario-cli", "config: impute needs input.income");
    const CategorySet cats = CategorySet::canonical();
    const auto survey = load_household_survey(c.resolve(c.households), cats);
    SurveyLoadOptions opt;
    opt.require_expenditure = false;
    const auto income = load_household_survey(c.resolve(c.income), cats, opt);
    imputation::ImputationOptions io;
    io.link = c.link;
    io.min_income = c.min_income;
    io.seed = c.seed;
    io.exec = c.execution;
    const auto result = imputation::impute(survey.records, income.records, io);

    const auto dir = output_dir(o, c);
    scenario::TableSet files;
    const auto extra = imputation::provenance_columns(result);
    files["imputed_households.csv"] = format_household_survey(result.records, cats, extra);
    std::map<std::string, std::string> facts = {
        {"imputed", std::to_string(result.records.size())},
        {"income_outliers", std::to_string(result.model.calibration.outliers())},
        {"floored_incomes", std::to_string(result.model.floored_incomes)},
        {"model_version", imputation::kModelVersion},
    };
    files["manifest.json"] = scenario::manifest_json(c, facts, {"imputed_households.csv", "manifest.json"});
    scenario::write_tables(files, dir);
    log::info("imputed " + std::to_string(result.records.size()) + " records into " + dir.string());
    return 0;
}

int cmd_run(const Common& o) {
    const auto c = load(o);
    const auto result = scenario::run_scenario(c);
    const auto dir = output_dir(o, c);
    const auto files = scenario::emit_reports(result, dir);
    log::info("wrote " + std::to_string(files.size()) + " files to " + dir.string());
    return 0;
}

int cmd_report(const Common& o, const std::string& from) {
    const auto c = load(o);
    const auto dir = output_dir(o, c);
    const std::filesystem::path source = from.empty() ? dir / "households.csv" : std::filesystem::path(from);
    scenario::write_tables(scenario::report_from_results(source, c), dir);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Price-shock microsimulation: input-output price formation, LES demand and distributional tables"};
    app.require_subcommand(1);
    Common o;
    std::uint64_t seed = 0;
    std::string from;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config", o.config, "run configuration file");
        if (needs_config) opt->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "random seed (overrides run.seed)");
        sub->add_option("--out", o.out, "output directory (overrides run.output)");
        sub->add_flag("--quiet", o.quiet, "suppress warnings");
    };
    auto* validate = app.add_subcommand("validate", "check the configuration and every input file");
    auto* impute = app.add_subcommand("impute", "impute expenditure into the income dataset");
    auto* run = app.add_subcommand("run", "run the full scenario and write all tables");
    auto* report = app.add_subcommand("report", "recompute the tables from a stored households.csv");
    auto* fixtures = app.add_subcommand("fixtures", "write the synthetic fixture bundle");
    add_common(validate, true);
    add_common(impute, true);
    add_common(run, true);
    add_common(report, true);
    report->add_option("--from", from, "per-household results (default: <out>/households.csv)");
    fixtures->add_option("--out", o.out, "directory for the bundle")->required();
    fixtures->add_flag("--quiet", o.quiet, "suppress warnings");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    for (auto* sub : {validate, impute, run, report})
        if (sub->parsed() && sub->count("--seed") > 0) o.seed = seed;
    log::set_level(o.quiet ? log::Level::quiet : log::Level::warn);

    try {
        if (validate->parsed()) return cmd_validate(o);
        if (impute->parsed()) return cmd_impute(o);
        if (run->parsed()) return cmd_run(o);
        if (report->parsed()) return cmd_report(o, from);
        if (fixtures->parsed()) {
            fixtures::write_bundle(o.out);
            return 0;
        }
    } catch (const NumericalError& e) {
        std::cerr << "error [" << e.module() << "]: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error [" << e.module() << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
