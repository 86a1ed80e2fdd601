#include "ptlab/report.hpp"

#include <algorithm>
#include <cstdio>

using nlohmann::json;

namespace ptlab {

ReportRow make_report_row(const std::string& attack, const std::string& dataset,
                          const MetricsReport& baseline, const MetricsReport& defended) {
    ReportRow row;
    row.attack = attack;
    row.dataset = dataset;
    row.baseline_acc = baseline.acc;
    row.baseline_asr = baseline.asr;
    row.defended_acc = defended.acc;
    row.defended_asr = defended.asr;
    row.isolation_precision = defended.isolation_precision;
    row.isolation_recall = defended.isolation_recall;
    return row;
}

namespace {

std::string pair_cell(double a, double b) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f/%.3f", a, b);
    return buf;
}

std::string isolation_cell(const ReportRow& row) {
    if (!row.isolation_precision || !row.isolation_recall) return "-";
    return pair_cell(*row.isolation_precision, *row.isolation_recall);
}

}  // namespace

std::string render_report_text(const std::vector<ReportRow>& rows) {
    const std::vector<std::string> header = {"Attack", "Dataset", "Baseline ACC/ASR",
                                             "PT ACC/ASR", "Isolation P/R"};
    std::vector<std::vector<std::string>> cells;
    cells.push_back(header);
    for (const auto& row : rows) {
        cells.push_back({row.attack, row.dataset, pair_cell(row.baseline_acc, row.baseline_asr),
                         pair_cell(row.defended_acc, row.defended_asr), isolation_cell(row)});
    }

    std::vector<size_t> widths(header.size(), 0);
    for (const auto& line : cells) {
        for (size_t c = 0; c < line.size(); ++c) widths[c] = std::max(widths[c], line[c].size());
    }

    std::string out;
    for (size_t r = 0; r < cells.size(); ++r) {
        for (size_t c = 0; c < cells[r].size(); ++c) {
            out += cells[r][c];
            if (c + 1 < cells[r].size()) {
                out.append(widths[c] - cells[r][c].size() + 2, ' ');
            }
        }
        out += "\n";
        if (r == 0) {
            size_t total = 0;
            for (size_t c = 0; c < widths.size(); ++c) {
                total += widths[c] + (c + 1 < widths.size() ? 2 : 0);
            }
            out.append(total, '-');
            out += "\n";
        }
    }
    return out;
}

json render_report_json(const std::vector<ReportRow>& rows) {
    json list = json::array();
    for (const auto& row : rows) {
        json r;
        r["attack"] = row.attack;
        r["dataset"] = row.dataset;
        r["baseline"] = {{"acc", row.baseline_acc}, {"asr", row.baseline_asr}};
        r["defended"] = {{"acc", row.defended_acc}, {"asr", row.defended_asr}};
        if (row.isolation_precision) r["isolation_precision"] = *row.isolation_precision;
        if (row.isolation_recall) r["isolation_recall"] = *row.isolation_recall;
        list.push_back(std::move(r));
    }
    json j;
    j["rows"] = std::move(list);
    return j;
}

std::vector<ReportRow> report_rows_from_json(const json& j) {
    std::vector<ReportRow> rows;
    for (const auto& r : j.at("rows")) {
        ReportRow row;
        row.attack = r.at("attack").get<std::string>();
        row.dataset = r.at("dataset").get<std::string>();
        row.baseline_acc = r.at("baseline").at("acc").get<double>();
        row.baseline_asr = r.at("baseline").at("asr").get<double>();
        row.defended_acc = r.at("defended").at("acc").get<double>();
        row.defended_asr = r.at("defended").at("asr").get<double>();
        if (r.contains("isolation_precision")) {
            row.isolation_precision = r.at("isolation_precision").get<double>();
        }
        if (r.contains("isolation_recall")) {
            row.isolation_recall = r.at("isolation_recall").get<double>();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace ptlab
