#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/types.hpp"
#include "data/manifest.hpp"
#include "model/train.hpp"

namespace ooaf {

/// Threshold-sweep IoU in percent: mean over t in {0.01..0.99} of
/// IoU(pred > t, gt >= 0.5), empty-union IoU defined as 1.
double aiou(const VecX& pred, const VecX& gt);

/// Histogram intersection of the sum-normalized maps.
double sim(const VecX& pred, const VecX& gt);

double mae(const VecX& pred, const VecX& gt);

/// Mann-Whitney rank AUC (average ranks on ties), in percent.
/// Throws when the binarized ground truth is single-class.
double auc(const VecX& pred, const VecX& gt);

struct SampleMetrics {
    std::string category;
    int index = 0;       // position within the category's eval list
    int object = 0;      // 0 = source, 1 = target
    double aiou = 0.0;
    std::optional<double> sim;  // absent when either map sums to zero
    double mae = 0.0;
    std::optional<double> auc;  // absent when the GT is single-class
};

struct MetricReport {
    double aiou = 0.0;
    double sim = 0.0;
    double mae = 0.0;
    double auc = 0.0;
    std::vector<SampleMetrics> breakdown;
};

struct EvalOptions {
    double occlusion_level = -1.0;  // < 0 disables occlusion
    uint64_t occlusion_seed = 0;
};

/// Forward every eval sample on its own category channel and macro-average
/// per-object metrics.
MetricReport evaluate(const DatasetManifest& manifest, const Net<float>& net,
                      const EvalOptions& options = {});

std::string report_to_json(const MetricReport& report);
/// Aligned text table in IOU, SIM, MAE, AUC column order.
std::string report_to_table(const MetricReport& report);

}  // namespace ooaf
