#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/types.hpp"

namespace ooaf {

/// One calibrated RGB-D viewpoint with a per-pixel feature map.
struct CameraView {
    Mat3 intrinsics = Mat3::Identity();
    Eigen::Matrix4d extrinsic = Eigen::Matrix4d::Identity();  // camera-from-world
    int width = 0;
    int height = 0;
    MatX depth;                 // H x W, meters, 0 = invalid
    std::vector<MatX> featmap;  // C planes of H x W
    std::vector<MatX> mask;     // M planes of H x W, optional

    void validate() const;
};

struct Projection {
    Eigen::Vector2d u = Eigen::Vector2d::Zero();
    double r_point = 0.0;  // z-depth of the point in the camera frame
    bool in_frustum = false;
};

/// Per-view fusion bookkeeping for one query point.
struct FusionWeights {
    Eigen::Vector2d u = Eigen::Vector2d::Zero();
    double r_sensor = 0.0;  // bilinearly sampled sensor depth
    double r_point = 0.0;
    double d = 0.0;        // r_sensor - r_point
    double d_trunc = 0.0;  // clamped to [-mu, mu]
    int visible = 0;
    double weight = 0.0;
};

struct FusedCloud {
    FeatureCloud cloud;
    MatX mask_probs;             // N x M, empty when no masks
    std::vector<int> coverage;   // views contributing per point
};

Projection project_to_view(const Vec3& x, const CameraView& view);

/// Bilinear sample of one image plane; u must be inside [0,W-1]x[0,H-1].
double bilinear_sample(const MatX& image, const Eigen::Vector2d& u);

/// Depth sampling is invalid when any of the 4 corners is 0.
bool bilinear_depth(const MatX& depth, const Eigen::Vector2d& u, double& out);

FusionWeights view_weight(const Vec3& x, const CameraView& view, double mu);

FusedCloud fuse_cloud(const MatX& points, const std::vector<CameraView>& views, double mu);

/// Camera description JSON + sidecar depth (16-bit PGM, millimeters) and
/// feature ("feat <H> <W> <C>\n" + little-endian f32) files.
CameraView load_camera(const std::string& json_path);
void save_depth_pgm(const MatX& depth_m, const std::string& path);
MatX load_depth_pgm(const std::string& path);
void save_feature_file(const std::vector<MatX>& planes, const std::string& path);
std::vector<MatX> load_feature_file(const std::string& path);

}  // namespace ooaf
