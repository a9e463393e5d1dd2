#include "fusion/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace ooaf {

void CameraView::validate() const {
    if (width < 1 || height < 1) throw std::invalid_argument("camera image size must be positive");
    if (std::abs(intrinsics(2, 2) - 1.0) > 1e-12)
        throw std::invalid_argument("intrinsics[2][2] must be 1");
    if (depth.rows() != height || depth.cols() != width)
        throw std::invalid_argument("depth image size mismatch");
    if (depth.size() > 0 && depth.minCoeff() < 0.0)
        throw std::invalid_argument("depth values must be >= 0");
    for (const auto& plane : featmap)
        if (plane.rows() != height || plane.cols() != width)
            throw std::invalid_argument("feature map size mismatch");
    for (const auto& plane : mask)
        if (plane.rows() != height || plane.cols() != width)
            throw std::invalid_argument("mask size mismatch");
}

Projection project_to_view(const Vec3& x, const CameraView& view) {
    Eigen::Vector4d xw(x.x(), x.y(), x.z(), 1.0);
    Vec3 xc = (view.extrinsic * xw).head<3>();
    Projection p;
    p.r_point = xc.z();
    if (p.r_point <= 0.0) return p;
    Vec3 h = view.intrinsics * (xc / xc.z());
    p.u = h.head<2>();
    p.in_frustum = p.u.x() >= 0.0 && p.u.x() <= view.width - 1.0 && p.u.y() >= 0.0 &&
                   p.u.y() <= view.height - 1.0;
    return p;
}

namespace {

struct BilinearCorners {
    int x0, x1, y0, y1;
    double fx, fy;
};

BilinearCorners corners(const MatX& image, const Eigen::Vector2d& u) {
    const int w = static_cast<int>(image.cols());
    const int h = static_cast<int>(image.rows());
    BilinearCorners c;
    c.x0 = std::clamp(static_cast<int>(std::floor(u.x())), 0, std::max(0, w - 2));
    c.y0 = std::clamp(static_cast<int>(std::floor(u.y())), 0, std::max(0, h - 2));
    c.x1 = std::min(c.x0 + 1, w - 1);
    c.y1 = std::min(c.y0 + 1, h - 1);
    c.fx = u.x() - c.x0;
    c.fy = u.y() - c.y0;
    return c;
}

}  // namespace

double bilinear_sample(const MatX& image, const Eigen::Vector2d& u) {
    BilinearCorners c = corners(image, u);
    return (1 - c.fy) * ((1 - c.fx) * image(c.y0, c.x0) + c.fx * image(c.y0, c.x1)) +
           c.fy * ((1 - c.fx) * image(c.y1, c.x0) + c.fx * image(c.y1, c.x1));
}

bool bilinear_depth(const MatX& depth, const Eigen::Vector2d& u, double& out) {
    BilinearCorners c = corners(depth, u);
    if (depth(c.y0, c.x0) == 0.0 || depth(c.y0, c.x1) == 0.0 || depth(c.y1, c.x0) == 0.0 ||
        depth(c.y1, c.x1) == 0.0)
        return false;
    out = bilinear_sample(depth, u);
    return true;
}

FusionWeights view_weight(const Vec3& x, const CameraView& view, double mu) {
    if (mu <= 0.0) throw std::invalid_argument("mu must be > 0");
    Projection p = project_to_view(x, view);
    FusionWeights fw;
    fw.u = p.u;
    fw.r_point = p.r_point;
    if (!p.in_frustum) return fw;
    double r_sensor = 0.0;
    if (!bilinear_depth(view.depth, p.u, r_sensor)) return fw;
    fw.r_sensor = r_sensor;
    fw.d = r_sensor - p.r_point;
    fw.d_trunc = std::clamp(fw.d, -mu, mu);
    if (fw.d < -mu) return fw;  // occluded beyond the truncation band
    fw.visible = 1;
    const double sigma = mu / 2.0;
    fw.weight = std::exp(-fw.d_trunc * fw.d_trunc / (2.0 * sigma * sigma));
    return fw;
}

FusedCloud fuse_cloud(const MatX& points, const std::vector<CameraView>& views, double mu) {
    if (views.empty()) throw std::invalid_argument("fusion needs at least one view");
    const size_t feat_dim = views.front().featmap.size();
    const size_t mask_dim = views.front().mask.size();
    for (const auto& v : views) {
        v.validate();
        if (v.featmap.size() != feat_dim)
            throw std::invalid_argument("feature dimension mismatch across views");
        if (v.mask.size() != mask_dim)
            throw std::invalid_argument("mask dimension mismatch across views");
    }
    const Eigen::Index n_points = points.rows();
    FusedCloud out;
    out.cloud.points = points;
    out.cloud.features = MatX::Zero(n_points, static_cast<Eigen::Index>(feat_dim));
    out.mask_probs = MatX::Zero(n_points, static_cast<Eigen::Index>(mask_dim));
    if (mask_dim == 0) out.mask_probs.resize(n_points, 0);
    out.coverage.assign(static_cast<size_t>(n_points), 0);

    struct Contribution {
        double w, r_point, ux, uy;
        VecX feat;
        VecX mask;
    };

    for (Eigen::Index i = 0; i < n_points; ++i) {
        std::vector<Contribution> contribs;
        for (const auto& view : views) {
            FusionWeights fw = view_weight(points.row(i).transpose(), view, mu);
            if (fw.weight <= 0.0) continue;
            Contribution c;
            c.w = fw.weight;
            c.r_point = fw.r_point;
            c.ux = fw.u.x();
            c.uy = fw.u.y();
            c.feat.resize(static_cast<Eigen::Index>(feat_dim));
            for (size_t k = 0; k < feat_dim; ++k)
                c.feat[static_cast<Eigen::Index>(k)] = bilinear_sample(view.featmap[k], fw.u);
            c.mask.resize(static_cast<Eigen::Index>(mask_dim));
            for (size_t k = 0; k < mask_dim; ++k)
                c.mask[static_cast<Eigen::Index>(k)] = bilinear_sample(view.mask[k], fw.u);
            contribs.push_back(std::move(c));
        }
        // canonical accumulation order makes fusion exactly view-order invariant
        std::sort(contribs.begin(), contribs.end(), [](const Contribution& a, const Contribution& b) {
            return std::tie(b.w, a.r_point, a.ux, a.uy) < std::tie(a.w, b.r_point, b.ux, b.uy);
        });
        double w_sum = 0.0;
        VecX feat_sum = VecX::Zero(static_cast<Eigen::Index>(feat_dim));
        VecX mask_sum = VecX::Zero(static_cast<Eigen::Index>(mask_dim));
        for (const auto& c : contribs) {
            w_sum += c.w;
            feat_sum += c.w * c.feat;
            mask_sum += c.w * c.mask;
        }
        out.coverage[static_cast<size_t>(i)] = static_cast<int>(contribs.size());
        if (w_sum > 0.0) {
            out.cloud.features.row(i) = (feat_sum / w_sum).transpose();
            if (mask_dim > 0) out.mask_probs.row(i) = (mask_sum / w_sum).transpose();
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// file formats

void save_depth_pgm(const MatX& depth_m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "P5\n" << depth_m.cols() << " " << depth_m.rows() << "\n65535\n";
    for (Eigen::Index y = 0; y < depth_m.rows(); ++y)
        for (Eigen::Index x = 0; x < depth_m.cols(); ++x) {
            double mm = std::clamp(std::round(depth_m(y, x) * 1000.0), 0.0, 65535.0);
            auto v = static_cast<uint16_t>(mm);
            unsigned char bytes[2] = {static_cast<unsigned char>(v >> 8),
                                      static_cast<unsigned char>(v & 0xff)};
            out.write(reinterpret_cast<char*>(bytes), 2);
        }
}

MatX load_depth_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    auto next_token = [&in, &path]() {
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw std::runtime_error("truncated PGM header: " + path);
    };
    if (next_token() != "P5") throw std::runtime_error("not a binary PGM: " + path);
    int w = std::stoi(next_token());
    int h = std::stoi(next_token());
    int maxval = std::stoi(next_token());
    if (maxval != 65535) throw std::runtime_error("depth PGM must be 16-bit: " + path);
    in.get();  // single whitespace after maxval
    MatX depth(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            unsigned char bytes[2];
            if (!in.read(reinterpret_cast<char*>(bytes), 2))
                throw std::runtime_error("truncated PGM data: " + path);
            depth(y, x) = static_cast<double>((bytes[0] << 8) | bytes[1]) / 1000.0;
        }
    return depth;
}

void save_feature_file(const std::vector<MatX>& planes, const std::string& path) {
    if (planes.empty()) throw std::invalid_argument("feature file needs >= 1 channel");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    const Eigen::Index h = planes[0].rows(), w = planes[0].cols();
    out << "feat " << h << " " << w << " " << planes.size() << "\n";
    for (Eigen::Index y = 0; y < h; ++y)
        for (Eigen::Index x = 0; x < w; ++x)
            for (const auto& plane : planes) {
                auto v = static_cast<float>(plane(y, x));
                out.write(reinterpret_cast<const char*>(&v), sizeof(float));
            }
}

std::vector<MatX> load_feature_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string magic;
    int h = 0, w = 0, c = 0;
    in >> magic >> h >> w >> c;
    if (magic != "feat" || h < 1 || w < 1 || c < 1)
        throw std::runtime_error("malformed feature file header: " + path);
    in.get();
    std::vector<MatX> planes(static_cast<size_t>(c), MatX(h, w));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int k = 0; k < c; ++k) {
                float v = 0.0f;
                if (!in.read(reinterpret_cast<char*>(&v), sizeof(float)))
                    throw std::runtime_error("truncated feature file: " + path);
                planes[static_cast<size_t>(k)](y, x) = v;
            }
    return planes;
}

CameraView load_camera(const std::string& json_path) {
    std::ifstream in(json_path);
    if (!in) throw std::runtime_error("cannot open " + json_path);
    nlohmann::json j = nlohmann::json::parse(in);
    CameraView view;
    auto intr = j.at("intrinsics").get<std::vector<double>>();
    auto extr = j.at("extrinsic").get<std::vector<double>>();
    if (intr.size() != 9 || extr.size() != 16)
        throw std::runtime_error("camera matrices must be 9/16 row-major values: " + json_path);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) view.intrinsics(r, c) = intr[static_cast<size_t>(3 * r + c)];
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) view.extrinsic(r, c) = extr[static_cast<size_t>(4 * r + c)];
    view.width = j.at("width").get<int>();
    view.height = j.at("height").get<int>();
    auto dir = std::filesystem::path(json_path).parent_path();
    view.depth = load_depth_pgm((dir / j.at("depth_file").get<std::string>()).string());
    view.featmap = load_feature_file((dir / j.at("feature_file").get<std::string>()).string());
    if (j.contains("mask_file"))
        view.mask = load_feature_file((dir / j.at("mask_file").get<std::string>()).string());
    view.validate();
    return view;
}

}  // namespace ooaf
