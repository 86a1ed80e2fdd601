#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ptlab/metrics.hpp"

namespace ptlab {

struct ReportRow {
    std::string attack;
    std::string dataset;
    double baseline_acc = 0.0;
    double baseline_asr = 0.0;
    double defended_acc = 0.0;
    double defended_asr = 0.0;
    std::optional<double> isolation_precision;
    std::optional<double> isolation_recall;
};

ReportRow make_report_row(const std::string& attack, const std::string& dataset,
                          const MetricsReport& baseline, const MetricsReport& defended);

// Aligned text table; ACC/ASR pairs formatted as "0.790/0.002".
std::string render_report_text(const std::vector<ReportRow>& rows);

nlohmann::json render_report_json(const std::vector<ReportRow>& rows);
std::vector<ReportRow> report_rows_from_json(const nlohmann::json& j);

}  // namespace ptlab
