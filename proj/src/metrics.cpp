// SPDX-License-Identifier: Apache-2.0
#include "marppg/metrics.hpp"

#include <cmath>

#include "marppg/csvio.hpp"
#include "marppg/errors.hpp"

namespace marppg {

namespace {

void require_pair(const char* op, const std::vector<double>& gt, const std::vector<double>& pred) {
    if (gt.empty() || gt.size() != pred.size()) {
        throw ValueError(std::string(op) + ": need equal nonzero lengths, got " +
                         std::to_string(gt.size()) + " and " + std::to_string(pred.size()));
    }
}

} // namespace

double mae(const std::vector<double>& gt, const std::vector<double>& pred) {
    require_pair("mae", gt, pred);
    double s = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) s += std::fabs(gt[i] - pred[i]);
    return s / static_cast<double>(gt.size());
}

double rmse(const std::vector<double>& gt, const std::vector<double>& pred) {
    require_pair("rmse", gt, pred);
    double s = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const double d = gt[i] - pred[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(gt.size()));
}

double mape(const std::vector<double>& gt, const std::vector<double>& pred) {
    require_pair("mape", gt, pred);
    double s = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] == 0.0) throw ValueError("mape: ground truth contains zero");
        s += std::fabs((gt[i] - pred[i]) / gt[i]);
    }
    return s / static_cast<double>(gt.size());
}

double pearson_r(const std::vector<double>& gt, const std::vector<double>& pred) {
    require_pair("pearson_r", gt, pred);
    if (gt.size() < 2) throw ValueError("pearson_r: need at least 2 samples");
    const auto n = static_cast<double>(gt.size());
    double mg = 0.0, mp = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        mg += gt[i];
        mp += pred[i];
    }
    mg /= n;
    mp /= n;
    double sgp = 0.0, sgg = 0.0, spp = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const double a = gt[i] - mg, b = pred[i] - mp;
        sgp += a * b;
        sgg += a * a;
        spp += b * b;
    }
    if (sgg == 0.0 || spp == 0.0) throw ValueError("pearson_r: zero-variance input");
    return sgp / std::sqrt(sgg * spp);
}

MetricsReport compute_metrics(const std::vector<SampleRow>& rows) {
    if (rows.empty()) throw ValueError("compute_metrics: no rows");
    std::vector<double> gt, pred;
    for (const auto& r : rows) {
        gt.push_back(r.gt_bpm);
        pred.push_back(r.pred_bpm);
    }
    MetricsReport rep;
    rep.n = static_cast<int>(rows.size());
    rep.rows = rows;
    rep.mae = mae(gt, pred);
    rep.rmse = rmse(gt, pred);
    rep.mape = mape(gt, pred);
    rep.pearson_r = rows.size() >= 2 ? pearson_r(gt, pred) : 1.0;
    return rep;
}

BlandAltman bland_altman(const std::vector<SampleRow>& rows) {
    if (rows.size() < 2) throw ValueError("bland_altman: need at least 2 rows");
    BlandAltman ba;
    double sum = 0.0;
    for (const auto& r : rows) {
        const double mean = 0.5 * (r.gt_bpm + r.pred_bpm);
        const double diff = r.pred_bpm - r.gt_bpm;
        ba.rows.emplace_back(mean, diff);
        sum += diff;
    }
    ba.bias = sum / static_cast<double>(rows.size());
    double var = 0.0;
    for (const auto& [mean, diff] : ba.rows) var += (diff - ba.bias) * (diff - ba.bias);
    var /= static_cast<double>(rows.size()); // population convention
    const double sd = std::sqrt(var);
    ba.loa_low = ba.bias - 1.96 * sd;
    ba.loa_high = ba.bias + 1.96 * sd;
    return ba;
}

void write_metrics_csv(const std::string& path, const MetricsReport& report, bool deterministic) {
    CsvWriter csv(path, deterministic);
    csv.row("source_id,gt_bpm,pred_bpm");
    for (const auto& r : report.rows) {
        csv.row(r.source_id + "," + format_g17(r.gt_bpm) + "," + format_g17(r.pred_bpm));
    }
    csv.comment("summary n=" + std::to_string(report.n) + " mae=" + format_g17(report.mae) +
                " rmse=" + format_g17(report.rmse) + " mape=" + format_g17(report.mape) +
                " pearson_r=" + format_g17(report.pearson_r));
}

void write_bland_altman_csv(const std::string& path, const BlandAltman& ba, bool deterministic) {
    CsvWriter csv(path, deterministic);
    csv.comment("bias=" + format_g17(ba.bias) + " loa_low=" + format_g17(ba.loa_low) +
                " loa_high=" + format_g17(ba.loa_high));
    csv.row("mean,diff");
    for (const auto& [mean, diff] : ba.rows) {
        csv.row(format_g17(mean) + "," + format_g17(diff));
    }
}

} // namespace marppg
