#include "core/cloud_io.hpp"

#include <cmath>
#include <charconv>
#include <fstream>
#include <sstream>

namespace ooaf {

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

FeatureCloud load_cloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    int lineno = 1;
    if (!std::getline(in, line)) parse_fail(path, 1, "empty file");
    std::istringstream header(line);
    std::string magic;
    int version = 0;
    long n_points = 0, feat_dim = -1, channels = -1;
    header >> magic >> version >> n_points >> feat_dim >> channels;
    if (magic != "ooaf-pc" || version != 1 || header.fail())
        parse_fail(path, 1, "malformed header, expected 'ooaf-pc 1 <N> <n> <K>'");
    if (n_points < 1) parse_fail(path, 1, "N must be >= 1");
    if (feat_dim < 0 || channels < 0) parse_fail(path, 1, "negative dimension");

    bool has_parts = false;
    std::streampos after_header = in.tellg();
    if (std::getline(in, line)) {
        std::istringstream maybe(line);
        std::string tag;
        int flag = 0;
        if (maybe >> tag && tag == "parts") {
            if (!(maybe >> flag) || flag != 1) parse_fail(path, 2, "malformed parts line");
            has_parts = true;
            lineno = 2;
        } else {
            in.seekg(after_header);
        }
    }

    FeatureCloud cloud;
    cloud.points.resize(n_points, 3);
    cloud.features.resize(n_points, feat_dim);
    cloud.affordance.resize(n_points, channels);
    if (has_parts) cloud.part_labels.resize(n_points);

    const long row_values = 3 + feat_dim + channels + (has_parts ? 1 : 0);
    for (long i = 0; i < n_points; ++i) {
        ++lineno;
        if (!std::getline(in, line)) parse_fail(path, lineno, "row count mismatch: expected " +
                                                                 std::to_string(n_points) + " rows");
        std::istringstream row(line);
        double value = 0.0;
        for (long j = 0; j < row_values - (has_parts ? 1 : 0); ++j) {
            if (!(row >> value)) parse_fail(path, lineno, "short row");
            if (!std::isfinite(value)) parse_fail(path, lineno, "non-finite value");
            if (j < 3) {
                cloud.points(i, j) = value;
            } else if (j < 3 + feat_dim) {
                cloud.features(i, j - 3) = value;
            } else {
                if (value < 0.0 || value > 1.0)
                    parse_fail(path, lineno, "affordance value out of [0,1]");
                cloud.affordance(i, j - 3 - feat_dim) = value;
            }
        }
        if (has_parts) {
            int part = 0;
            if (!(row >> part)) parse_fail(path, lineno, "missing part label");
            cloud.part_labels[i] = part;
        }
        std::string trailing;
        if (row >> trailing) parse_fail(path, lineno, "trailing data");
    }
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream rest(line);
        std::string tok;
        if (rest >> tok) parse_fail(path, lineno, "trailing data");
    }
    cloud.validate();
    return cloud;
}

void save_cloud(const FeatureCloud& cloud, const std::string& path) {
    cloud.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(12);
    out << "ooaf-pc 1 " << cloud.size() << " " << cloud.feature_dim() << " " << cloud.channels()
        << "\n";
    if (cloud.has_parts()) out << "parts 1\n";
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
        out << cloud.points(i, 0) << " " << cloud.points(i, 1) << " " << cloud.points(i, 2);
        for (Eigen::Index j = 0; j < cloud.feature_dim(); ++j) out << " " << cloud.features(i, j);
        for (Eigen::Index j = 0; j < cloud.channels(); ++j) out << " " << cloud.affordance(i, j);
        if (cloud.has_parts()) out << " " << cloud.part_labels[i];
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace ooaf
