// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace marppg {

double mae(const std::vector<double>& gt, const std::vector<double>& pred);
double rmse(const std::vector<double>& gt, const std::vector<double>& pred);
/// Mean |(gt - pred) / gt|, reported as a fraction. Every gt must be nonzero.
double mape(const std::vector<double>& gt, const std::vector<double>& pred);
/// Sample Pearson correlation; both inputs must be non-constant.
double pearson_r(const std::vector<double>& gt, const std::vector<double>& pred);

struct SampleRow {
    std::string source_id;
    double gt_bpm = 0.0;
    double pred_bpm = 0.0;
};

struct MetricsReport {
    int n = 0;
    double mae = 0.0, rmse = 0.0, mape = 0.0;
    double pearson_r = 0.0;
    std::vector<SampleRow> rows;
};

MetricsReport compute_metrics(const std::vector<SampleRow>& rows);

struct BlandAltman {
    double bias = 0.0;
    double loa_low = 0.0, loa_high = 0.0;        // bias -/+ 1.96 * population sd
    std::vector<std::pair<double, double>> rows; // (mean, diff = pred - gt)
};

BlandAltman bland_altman(const std::vector<SampleRow>& rows);

// metrics_report.csv: source_id,gt_bpm,pred_bpm rows + a summary comment.
void write_metrics_csv(const std::string& path, const MetricsReport& report, bool deterministic);
// bland_altman.csv: mean,diff rows with bias/limits comment header.
void write_bland_altman_csv(const std::string& path, const BlandAltman& ba, bool deterministic);

} // namespace marppg
