#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "emh/errors.hpp"
#include "emh/runner.hpp"

namespace emh {

namespace {

std::string g12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

nlohmann::json metadata_json(const RunMetadata& md) {
    return {{"aligned_rows", md.aligned_rows},
            {"dataset_rows", md.dataset_rows},
            {"train_rows", md.train_rows},
            {"validation_rows", md.validation_rows},
            {"test_rows", md.test_rows},
            {"train_block_positive_fraction", md.train_block_positive_fraction},
            {"train_positive_fraction", md.train_positive_fraction},
            {"validation_positive_fraction", md.validation_positive_fraction},
            {"test_positive_fraction", md.test_positive_fraction},
            {"buy_and_hold_cumulative", md.buy_and_hold_cumulative},
            {"buy_and_hold_accuracy", md.buy_and_hold_accuracy},
            {"incomplete", md.incomplete}};
}

RunMetadata metadata_from_json(const nlohmann::json& j) {
    RunMetadata md;
    md.aligned_rows = j.at("aligned_rows").get<std::size_t>();
    md.dataset_rows = j.at("dataset_rows").get<std::size_t>();
    md.train_rows = j.at("train_rows").get<std::size_t>();
    md.validation_rows = j.at("validation_rows").get<std::size_t>();
    md.test_rows = j.at("test_rows").get<std::size_t>();
    md.train_block_positive_fraction =
        j.at("train_block_positive_fraction").get<double>();
    md.train_positive_fraction = j.at("train_positive_fraction").get<double>();
    md.validation_positive_fraction =
        j.at("validation_positive_fraction").get<double>();
    md.test_positive_fraction = j.at("test_positive_fraction").get<double>();
    md.buy_and_hold_cumulative = j.at("buy_and_hold_cumulative").get<double>();
    md.buy_and_hold_accuracy = j.at("buy_and_hold_accuracy").get<double>();
    md.incomplete = j.at("incomplete").get<bool>();
    return md;
}

} // namespace

void emit_report(const AggregateReport& report, ReportFormat format,
                 const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw StorageError("cannot write report '" + path.string() + "'");

    if (format == ReportFormat::csv) {
        out << "feature_set_id,name,acc_in,acc_out,acc_out_ci_lo,"
               "acc_out_ci_hi,loss_in,loss_out,log_cumsum,sharpe,"
               "pos_signals,neg_signals,iterations\n";
        for (const auto& r : report.rows) {
            out << r.feature_set_id << ',' << r.name << ','
                << g12(r.mean_in_sample_accuracy) << ','
                << g12(r.mean_out_of_sample_accuracy) << ','
                << (r.ci_defined ? g12(r.acc_out_ci_lo) : "") << ','
                << (r.ci_defined ? g12(r.acc_out_ci_hi) : "") << ','
                << g12(r.mean_in_sample_loss) << ','
                << g12(r.mean_out_of_sample_loss) << ','
                << g12(r.mean_cumulative_log_return) << ','
                << g12(r.mean_sharpe) << ',' << g12(r.mean_positive_count)
                << ',' << g12(r.mean_negative_count) << ',' << r.iterations
                << '\n';
        }
        if (!out)
            throw StorageError("write failed for '" + path.string() + "'");
        return;
    }

    nlohmann::json doc;
    doc["schema_version"] = kReportSchemaVersion;
    doc["version"] = report.version;
    doc["config"] = report.config_text;
    doc["metadata"] = metadata_json(report.metadata);
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const auto& r = report.rows[i];
        nlohmann::json row = {
            {"feature_set_id", r.feature_set_id},
            {"name", r.name},
            {"iterations", r.iterations},
            {"acc_in", r.mean_in_sample_accuracy},
            {"acc_out", r.mean_out_of_sample_accuracy},
            {"loss_in", r.mean_in_sample_loss},
            {"loss_out", r.mean_out_of_sample_loss},
            {"log_cumsum", r.mean_cumulative_log_return},
            {"sharpe", r.mean_sharpe},
            {"sharpe_aggregate", r.sharpe_aggregate},
            {"pos_signals", r.mean_positive_count},
            {"neg_signals", r.mean_negative_count}};
        if (r.ci_defined) {
            row["acc_out_ci"] = {{"lo", r.acc_out_ci_lo},
                                 {"hi", r.acc_out_ci_hi}};
        } else {
            row["acc_out_ci"] = nullptr;
        }
        nlohmann::json detail = nlohmann::json::array();
        if (i < report.iteration_results.size()) {
            for (const auto& it : report.iteration_results[i]) {
                detail.push_back({{"seed", it.seed},
                                  {"acc_in", it.in_sample_accuracy},
                                  {"acc_out", it.out_of_sample_accuracy},
                                  {"loss_in", it.final_in_sample_loss},
                                  {"loss_out", it.final_out_of_sample_loss},
                                  {"log_cumsum", it.cumulative_log_return},
                                  {"sharpe", it.sharpe},
                                  {"daily_sd", it.strategy_daily_sd},
                                  {"pos_signals", it.positive_count},
                                  {"neg_signals", it.negative_count}});
            }
        }
        row["iteration_results"] = std::move(detail);
        rows.push_back(std::move(row));
    }
    doc["rows"] = std::move(rows);
    out << doc.dump(2) << '\n';
    if (!out)
        throw StorageError("write failed for '" + path.string() + "'");
}

AggregateReport parse_report_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw StorageError("cannot open report '" + path.string() + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad report JSON '" + path.string() + "': " +
                         e.what());
    }
    if (doc.at("schema_version").get<int>() != kReportSchemaVersion)
        throw ParseError("unsupported report schema_version");

    AggregateReport report;
    report.version = doc.at("version").get<std::string>();
    report.config_text = doc.at("config").get<std::string>();
    report.metadata = metadata_from_json(doc.at("metadata"));
    for (const auto& row : doc.at("rows")) {
        AggregateRow r;
        r.feature_set_id = row.at("feature_set_id").get<int>();
        r.name = row.at("name").get<std::string>();
        r.iterations = row.at("iterations").get<int>();
        r.mean_in_sample_accuracy = row.at("acc_in").get<double>();
        r.mean_out_of_sample_accuracy = row.at("acc_out").get<double>();
        r.mean_in_sample_loss = row.at("loss_in").get<double>();
        r.mean_out_of_sample_loss = row.at("loss_out").get<double>();
        r.mean_cumulative_log_return = row.at("log_cumsum").get<double>();
        r.mean_sharpe = row.at("sharpe").get<double>();
        r.sharpe_aggregate = row.at("sharpe_aggregate").get<double>();
        r.mean_positive_count = row.at("pos_signals").get<double>();
        r.mean_negative_count = row.at("neg_signals").get<double>();
        if (!row.at("acc_out_ci").is_null()) {
            r.ci_defined = true;
            r.acc_out_ci_lo = row.at("acc_out_ci").at("lo").get<double>();
            r.acc_out_ci_hi = row.at("acc_out_ci").at("hi").get<double>();
        }
        std::vector<IterationResult> detail;
        for (const auto& it : row.at("iteration_results")) {
            IterationResult d;
            d.feature_set_id = r.feature_set_id;
            d.seed = it.at("seed").get<std::uint64_t>();
            d.in_sample_accuracy = it.at("acc_in").get<double>();
            d.out_of_sample_accuracy = it.at("acc_out").get<double>();
            d.final_in_sample_loss = it.at("loss_in").get<double>();
            d.final_out_of_sample_loss = it.at("loss_out").get<double>();
            d.cumulative_log_return = it.at("log_cumsum").get<double>();
            d.sharpe = it.at("sharpe").get<double>();
            d.strategy_daily_sd = it.at("daily_sd").get<double>();
            d.positive_count = it.at("pos_signals").get<int>();
            d.negative_count = it.at("neg_signals").get<int>();
            detail.push_back(std::move(d));
        }
        report.rows.push_back(std::move(r));
        report.iteration_results.push_back(std::move(detail));
    }
    return report;
}

} // namespace emh
