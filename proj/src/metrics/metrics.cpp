#include "metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "data/synth.hpp"

namespace ooaf {

namespace {

void check_lengths(const VecX& pred, const VecX& gt) {
    if (pred.size() != gt.size()) throw std::invalid_argument("metric length mismatch");
    if (pred.size() == 0) throw std::invalid_argument("empty metric input");
}

}  // namespace

double aiou(const VecX& pred, const VecX& gt) {
    check_lengths(pred, gt);
    double total = 0.0;
    for (int step = 1; step <= 99; ++step) {
        const double t = step / 100.0;
        long inter = 0, uni = 0;
        for (Eigen::Index i = 0; i < pred.size(); ++i) {
            bool p = pred[i] > t;
            bool g = gt[i] >= 0.5;
            inter += p && g;
            uni += p || g;
        }
        total += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    }
    return 100.0 * total / 99.0;
}

double sim(const VecX& pred, const VecX& gt) {
    check_lengths(pred, gt);
    if (pred.minCoeff() < 0.0 || gt.minCoeff() < 0.0)
        throw std::invalid_argument("sim requires non-negative maps");
    double ps = pred.sum(), gs = gt.sum();
    if (ps <= 0.0 || gs <= 0.0) throw std::runtime_error("undefined similarity");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < pred.size(); ++i) acc += std::min(pred[i] / ps, gt[i] / gs);
    return acc;
}

double mae(const VecX& pred, const VecX& gt) {
    check_lengths(pred, gt);
    return (pred - gt).cwiseAbs().mean();
}

double auc(const VecX& pred, const VecX& gt) {
    check_lengths(pred, gt);
    const Eigen::Index n = pred.size();
    long pos = 0;
    for (Eigen::Index i = 0; i < n; ++i) pos += gt[i] >= 0.5;
    if (pos == 0 || pos == n) throw std::runtime_error("AUC undefined");
    // average ranks with tie handling
    std::vector<Eigen::Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&pred](Eigen::Index a, Eigen::Index b) { return pred[a] < pred[b]; });
    std::vector<double> rank(static_cast<size_t>(n));
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && pred[order[static_cast<size_t>(j + 1)]] == pred[order[static_cast<size_t>(i)]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (Eigen::Index q = i; q <= j; ++q) rank[static_cast<size_t>(order[static_cast<size_t>(q)])] = avg;
        i = j + 1;
    }
    double rank_sum = 0.0;
    for (Eigen::Index q = 0; q < n; ++q)
        if (gt[q] >= 0.5) rank_sum += rank[static_cast<size_t>(q)];
    double neg = static_cast<double>(n - pos);
    double u = rank_sum - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
    return 100.0 * u / (static_cast<double>(pos) * neg);
}

MetricReport evaluate(const DatasetManifest& manifest, const Net<float>& net,
                      const EvalOptions& options) {
    MetricReport report;
    size_t eval_total = 0;
    for (const auto& cs : manifest.categories) eval_total += cs.eval.size();
    if (eval_total == 0) throw std::invalid_argument("empty eval set");

    double sum_aiou = 0.0, sum_sim = 0.0, sum_mae = 0.0, sum_auc = 0.0;
    long count = 0, sim_count = 0, auc_count = 0;
    for (const auto& cs : manifest.categories) {
        for (size_t e = 0; e < cs.eval.size(); ++e) {
            ObjectPair pair = load_sample(cs.eval[e]);
            const int ch = pair.category.id;
            if (options.occlusion_level >= 0.0) {
                uint64_t base = options.occlusion_seed ^
                                (static_cast<uint64_t>(ch) << 32) ^ static_cast<uint64_t>(e);
                pair.source = apply_occlusion(pair.source, options.occlusion_level, base);
                pair.target = apply_occlusion(pair.target, options.occlusion_level, base ^ 1);
            }
            auto [map_src, map_tgt] = predict(net, pair);
            for (int obj = 0; obj < 2; ++obj) {
                const FeatureCloud& cloud = obj == 0 ? pair.source : pair.target;
                VecX pred = (obj == 0 ? map_src : map_tgt).col(ch);
                VecX gt = cloud.affordance.col(ch);
                SampleMetrics sm;
                sm.category = pair.category.name;
                sm.index = static_cast<int>(e);
                sm.object = obj;
                sm.aiou = aiou(pred, gt);
                if (pred.sum() > 0.0 && gt.sum() > 0.0) sm.sim = sim(pred, gt);
                sm.mae = mae(pred, gt);
                bool has_pos = (gt.array() >= 0.5).any();
                bool has_neg = (gt.array() < 0.5).any();
                if (has_pos && has_neg) sm.auc = auc(pred, gt);
                sum_aiou += sm.aiou;
                if (sm.sim) {
                    sum_sim += *sm.sim;
                    ++sim_count;
                }
                sum_mae += sm.mae;
                if (sm.auc) {
                    sum_auc += *sm.auc;
                    ++auc_count;
                }
                ++count;
                report.breakdown.push_back(std::move(sm));
            }
        }
    }
    report.aiou = sum_aiou / static_cast<double>(count);
    report.sim = sim_count > 0 ? sum_sim / static_cast<double>(sim_count) : 0.0;
    report.mae = sum_mae / static_cast<double>(count);
    report.auc = auc_count > 0 ? sum_auc / static_cast<double>(auc_count) : 0.0;
    return report;
}

std::string report_to_json(const MetricReport& report) {
    nlohmann::json j = {{"aiou", report.aiou}, {"sim", report.sim},
                        {"mae", report.mae},   {"auc", report.auc},
                        {"breakdown", nlohmann::json::array()}};
    for (const auto& sm : report.breakdown) {
        nlohmann::json row = {{"category", sm.category},
                              {"index", sm.index},
                              {"object", sm.object == 0 ? "source" : "target"},
                              {"aiou", sm.aiou},
                              {"mae", sm.mae}};
        if (sm.sim) row["sim"] = *sm.sim;
        if (sm.auc) row["auc"] = *sm.auc;
        j["breakdown"].push_back(row);
    }
    return j.dump(2);
}

std::string report_to_table(const MetricReport& report) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(4);
    out << "category        obj     IOU      SIM      MAE      AUC\n";
    for (const auto& sm : report.breakdown) {
        out << sm.category;
        for (size_t p = sm.category.size(); p < 12; ++p) out << ' ';
        out << "#" << sm.index << "  " << (sm.object == 0 ? "src" : "tgt") << "  " << sm.aiou
            << "  ";
        if (sm.sim)
            out << *sm.sim;
        else
            out << "n/a";
        out << "  " << sm.mae << "  ";
        if (sm.auc)
            out << *sm.auc;
        else
            out << "n/a";
        out << "\n";
    }
    out << "mean                    " << report.aiou << "  " << report.sim << "  " << report.mae
        << "  " << report.auc << "\n";
    return out.str();
}

}  // namespace ooaf
