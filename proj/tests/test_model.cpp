#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "core/types.hpp"
#include "data/synth.hpp"
#include "model/checkpoint.hpp"
#include "model/net.hpp"
#include "model/sampling.hpp"
#include "model/train.hpp"

using namespace ooaf;
namespace fs = std::filesystem;

namespace {

MatX random_points(int n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    MatX pts(n, 3);
    for (int i = 0; i < n; ++i) {
        Vec3 p;
        do p = {uni(rng), uni(rng), uni(rng)};
        while (p.norm() > 1.0);
        pts.row(i) = p.transpose();
    }
    return pts;
}

FeatureCloud small_cloud(int n, int n_feat, uint64_t seed) {
    FeatureCloud c;
    c.points = random_points(n, seed);
    std::mt19937_64 rng(seed ^ 99);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    c.features.resize(n, n_feat);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n_feat; ++j) c.features(i, j) = uni(rng);
    c.affordance.resize(n, 0);
    return c;
}

// greedy max-min re-implementation, ties to the lowest index
std::vector<int> fps_oracle(const MatX& pts, int count) {
    int n = static_cast<int>(pts.rows());
    Eigen::RowVector3d centroid = pts.colwise().mean();
    int first = 0;
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
        double d = (pts.row(i) - centroid).norm();
        if (d > best + 1e-15) {
            best = d;
            first = i;
        }
    }
    std::vector<int> out = {first};
    std::vector<double> mind(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) mind[static_cast<size_t>(i)] = (pts.row(i) - pts.row(first)).norm();
    while (static_cast<int>(out.size()) < count) {
        int pick = 0;
        double far = -1.0;
        for (int i = 0; i < n; ++i)
            if (mind[static_cast<size_t>(i)] > far + 1e-15) {
                far = mind[static_cast<size_t>(i)];
                pick = i;
            }
        out.push_back(pick);
        for (int i = 0; i < n; ++i)
            mind[static_cast<size_t>(i)] =
                std::min(mind[static_cast<size_t>(i)], (pts.row(i) - pts.row(pick)).norm());
    }
    return out;
}

// ---- independent double-precision forward oracle ----

MatX o_linear(const MatX& x, const MatT<double>& w, const MatT<double>& b) {
    return (x * w).rowwise() + b.row(0);
}

MatX o_gelu(const MatX& x) {
    return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); });
}

MatX o_layer_norm(const MatX& x, const MatT<double>& g, const MatT<double>& b, double eps) {
    MatX out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        double mean = x.row(r).mean();
        double var = (x.row(r).array() - mean).square().mean();
        Eigen::RowVectorXd xhat = ((x.row(r).array() - mean) / std::sqrt(var + eps)).matrix();
        out.row(r) = xhat.cwiseProduct(g.row(0)) + b.row(0);
    }
    return out;
}

MatX o_attention(const BlockParams<double>& bp, const MatX& q_in, const MatX& kv_in,
                 const ModelConfig& cfg) {
    int dh = cfg.token_dim / cfg.heads;
    MatX q = o_linear(q_in, bp.wq, bp.bq);
    MatX k = kv_in * bp.wk;
    MatX v = o_linear(kv_in, bp.wv, bp.bv);
    MatX concat(q_in.rows(), cfg.token_dim);
    for (int h = 0; h < cfg.heads; ++h) {
        MatX scores = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() /
                      std::sqrt(static_cast<double>(dh));
        for (Eigen::Index r = 0; r < scores.rows(); ++r) {
            Eigen::RowVectorXd e = (scores.row(r).array() - scores.row(r).maxCoeff()).exp();
            scores.row(r) = e / e.sum();
        }
        concat.middleCols(h * dh, dh) = scores * v.middleCols(h * dh, dh);
    }
    return o_linear(concat, bp.wo, bp.bo);
}

MatX o_tokenize(const Net<double>& net, const PreparedObject& po, int role) {
    const auto& p = net.params;
    const ModelConfig& cfg = net.cfg;
    MatX a2 = o_linear(o_gelu(o_linear(po.patch_rows, p.enc1_w, p.enc1_b)), p.enc2_w, p.enc2_b);
    MatX pooled(cfg.num_groups, cfg.token_dim);
    for (int t = 0; t < cfg.num_groups; ++t)
        pooled.row(t) =
            a2.middleRows(static_cast<Eigen::Index>(t) * cfg.group_size, cfg.group_size)
                .colwise()
                .maxCoeff();
    MatX concat(cfg.num_groups, cfg.token_dim + 2);
    concat.leftCols(cfg.token_dim) = pooled;
    concat.col(cfg.token_dim).setConstant(role == 0 ? 1.0 : 0.0);
    concat.col(cfg.token_dim + 1).setConstant(role == 0 ? 0.0 : 1.0);
    MatX zp = o_linear(concat, p.proj_w, p.proj_b);
    MatX pos = o_linear(o_gelu(o_linear(po.centers, p.pos1_w, p.pos1_b)), p.pos2_w, p.pos2_b);
    return zp + pos;
}

std::pair<MatX, MatX> o_forward_maps(const Net<double>& net, const PreparedObject& src,
                                     const PreparedObject& tgt) {
    const ModelConfig& cfg = net.cfg;
    MatX s = o_tokenize(net, src, 0);
    MatX t = o_tokenize(net, tgt, 1);
    for (int b = 0; b < cfg.decoder_blocks; ++b) {
        const auto& bp = net.params.blocks[static_cast<size_t>(b)];
        MatX sn = o_layer_norm(s, bp.ln1_g, bp.ln1_b, cfg.norm_epsilon);
        MatX tn = o_layer_norm(t, bp.ln1_g, bp.ln1_b, cfg.norm_epsilon);
        MatX s1 = s + o_attention(bp, sn, tn, cfg);
        MatX t1 = t + o_attention(bp, tn, sn, cfg);
        MatX s1n = o_layer_norm(s1, bp.ln2_g, bp.ln2_b, cfg.norm_epsilon);
        MatX t1n = o_layer_norm(t1, bp.ln2_g, bp.ln2_b, cfg.norm_epsilon);
        s = s1 + o_linear(o_gelu(o_linear(s1n, bp.ff1_w, bp.ff1_b)), bp.ff2_w, bp.ff2_b);
        t = t1 + o_linear(o_gelu(o_linear(t1n, bp.ff1_w, bp.ff1_b)), bp.ff2_w, bp.ff2_b);
    }
    const auto& p = net.params;
    auto head = [&](const MatX& h, const PreparedObject& po) {
        MatX logits = o_linear(
            o_gelu(o_linear(o_gelu(o_linear(h, p.head1_w, p.head1_b)), p.head2_w, p.head2_b)),
            p.head3_w, p.head3_b);
        MatX sig = logits.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
        MatX map(po.n_points, sig.cols());
        for (int i = 0; i < po.n_points; ++i) map.row(i) = sig.row(po.assign[static_cast<size_t>(i)]);
        return map;
    };
    return {head(s, src), head(t, tgt)};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("ooaf_model_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("fps with T = N returns every index") {
    MatX pts = random_points(16, 1);
    std::vector<int> sel = fps(pts, 16);
    CHECK(sel == fps_oracle(pts, 16));
    std::vector<int> sorted = sel;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> all(16);
    std::iota(all.begin(), all.end(), 0);
    CHECK(sorted == all);
}

TEST_CASE("fps on the unit square picks index 0 then the opposite corner") {
    MatX pts(4, 3);
    pts << 0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 0;
    std::vector<int> sel = fps(pts, 2);
    REQUIRE(sel.size() == 2);
    CHECK(sel[0] == 0);
    CHECK(sel[1] == 3);
}

TEST_CASE("fps matches the greedy oracle on random clouds") {
    for (uint64_t s = 0; s < 8; ++s) {
        MatX pts = random_points(64, 10 + s);
        CHECK(fps(pts, 20) == fps_oracle(pts, 20));
    }
    CHECK_THROWS_AS(fps(random_points(4, 1), 5), std::invalid_argument);
}

TEST_CASE("knn_group selects the k nearest within radius") {
    MatX pts = random_points(50, 21);
    MatX centers(3, 3);
    centers.row(0) = pts.row(7);
    centers.row(1) = pts.row(13);
    centers.row(2) = pts.row(42);

    SUBCASE("k = 1 returns the center itself") {
        auto groups = knn_group(pts, centers, 1, 0.3);
        CHECK(groups[0] == std::vector<int>{7});
        CHECK(groups[1] == std::vector<int>{13});
        CHECK(groups[2] == std::vector<int>{42});
    }
    SUBCASE("matches a brute-force sorted-distance oracle") {
        const int k = 6;
        const double radius = 0.4;
        auto groups = knn_group(pts, centers, k, radius);
        for (int c = 0; c < 3; ++c) {
            std::vector<std::pair<double, int>> by_dist;
            for (int i = 0; i < 50; ++i) {
                double d = (pts.row(i) - centers.row(c)).norm();
                if (d <= radius) by_dist.emplace_back(d, i);
            }
            std::sort(by_dist.begin(), by_dist.end());
            std::vector<int> expect;
            for (int j = 0; j < k; ++j)
                expect.push_back(
                    by_dist[std::min<size_t>(static_cast<size_t>(j), by_dist.size() - 1)].second);
            CHECK(groups[static_cast<size_t>(c)] == expect);
        }
    }
    SUBCASE("an isolated center repeats its nearest neighbor") {
        MatX far(1, 3);
        far << 10, 10, 10;
        MatX both(51, 3);
        both.topRows(50) = pts;
        both.row(50) = far;
        auto groups = knn_group(both, far, 4, 0.1);
        CHECK(groups[0] == std::vector<int>(4, 50));
    }
    SUBCASE("a center with no point in radius is an error") {
        MatX lonely(1, 3);
        lonely << 10, 10, 10;
        CHECK_THROWS_AS(knn_group(pts, lonely, 2, 0.1), std::invalid_argument);
    }
}

TEST_CASE("nearest_center breaks ties by the lowest index") {
    MatX pts(1, 3);
    pts << 0, 0, 0;
    MatX centers(2, 3);
    centers << 1, 0, 0, -1, 0, 0;  // equidistant
    CHECK(nearest_center(pts, centers) == std::vector<int>{0});
}

TEST_CASE("tokenizer is permutation-invariant within a patch and role-sensitive") {
    ModelConfig cfg = ModelConfig::small();
    Net<double> net(cfg);
    FeatureCloud cloud = small_cloud(32, cfg.feature_dim, 3);
    PreparedObject po = prepare_object(cloud, cfg);

    MatT<double> base = net.tokenizer_tokens(po, 0);

    SUBCASE("row permutation inside one patch leaves tokens unchanged") {
        PreparedObject shuffled = po;
        shuffled.patch_rows.row(0).swap(shuffled.patch_rows.row(cfg.group_size - 1));
        shuffled.patch_rows.row(1).swap(shuffled.patch_rows.row(2));
        MatT<double> tokens = net.tokenizer_tokens(shuffled, 0);
        CHECK((tokens - base).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("role changes the tokens") {
        MatT<double> other = net.tokenizer_tokens(po, 1);
        CHECK((other - base).cwiseAbs().maxCoeff() > 1e-8);
    }
    SUBCASE("tokens match the staged oracle") {
        CHECK((base - o_tokenize(net, po, 0)).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("forward pass matches a staged full-network oracle") {
    ModelConfig cfg = ModelConfig::small();
    cfg.channels = 3;
    Net<double> net(cfg);
    FeatureCloud src = small_cloud(40, cfg.feature_dim, 4);
    FeatureCloud tgt = small_cloud(36, cfg.feature_dim, 5);
    PreparedObject ps = prepare_object(src, cfg);
    PreparedObject pt = prepare_object(tgt, cfg);

    Forward<double> f = net.forward(ps, pt, /*train=*/false);
    MatT<double> map_s = net.per_point_map(f.src, ps);
    MatT<double> map_t = net.per_point_map(f.tgt, pt);
    auto [os, ot] = o_forward_maps(net, ps, pt);

    CHECK(map_s.rows() == 40);
    CHECK(map_s.cols() == 3);
    CHECK((map_s - os).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((map_t - ot).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(map_s.minCoeff() > 0.0);
    CHECK(map_s.maxCoeff() < 1.0);

    SUBCASE("train mode with zero dropout equals eval mode") {
        std::mt19937_64 rng(1);
        Forward<double> ftrain = net.forward(ps, pt, /*train=*/true, &rng);
        CHECK((net.per_point_map(ftrain.src, ps) - map_s).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("repeated eval calls are identical") {
        Forward<double> again = net.forward(ps, pt, false);
        CHECK((net.per_point_map(again.src, ps) - map_s).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("self-attention ablation changes the outputs") {
        ModelConfig abl = cfg;
        abl.cross_attention = false;
        Net<double> net2(abl);
        net2.params = net.params;
        Forward<double> f2 = net2.forward(ps, pt, false);
        CHECK((net2.per_point_map(f2.src, ps) - map_s).cwiseAbs().maxCoeff() > 1e-8);
    }
}

TEST_CASE("points coincident with a center read that center's output") {
    ModelConfig cfg = ModelConfig::small();
    Net<double> net(cfg);
    FeatureCloud cloud = small_cloud(24, cfg.feature_dim, 9);
    PreparedObject po = prepare_object(cloud, cfg);
    // brute-force nearest-center scan
    for (int i = 0; i < po.n_points; ++i) {
        int best = 0;
        double bd = 1e300;
        for (Eigen::Index c = 0; c < po.centers.rows(); ++c) {
            double d = (cloud.points.row(i) - po.centers.row(c)).norm();
            if (d < bd - 1e-15) {
                bd = d;
                best = static_cast<int>(c);
            }
        }
        CHECK(po.assign[static_cast<size_t>(i)] == best);
    }
    for (int t = 0; t < cfg.num_groups; ++t) {
        int idx = po.center_index[static_cast<size_t>(t)];
        CHECK((cloud.points.row(idx) - po.centers.row(t)).norm() == 0.0);
    }
}

TEST_CASE("bce_loss analytic values and loop oracle") {
    VecX half = VecX::Constant(8, 0.5);
    CHECK(bce_loss(half, half) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    VecX pred(4), gt(4);
    pred << 1e-7, 1.0 - 1e-7, 1e-7, 1.0 - 1e-7;
    gt << 0, 1, 0, 1;
    CHECK(bce_loss(pred, gt) < 1e-5);

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> uni(0.01, 0.99);
    VecX p(32), y(32);
    for (int i = 0; i < 32; ++i) {
        p[i] = uni(rng);
        y[i] = uni(rng);
    }
    double naive = 0.0;
    for (int i = 0; i < 32; ++i)
        naive -= y[i] * std::log(p[i]) + (1.0 - y[i]) * std::log(1.0 - p[i]);
    naive /= 32.0;
    CHECK(bce_loss(p, y) == doctest::Approx(naive).epsilon(1e-10));

    CHECK_THROWS_AS(bce_loss(p, VecX::Zero(3)), std::invalid_argument);
}

namespace {

std::vector<ObjectPair> tiny_train_set(int n_points, int feature_dim) {
    SynthOptions opt;
    opt.n_points = n_points;
    opt.n_channels = 2;
    std::vector<ObjectPair> pairs;
    pairs.push_back(synth_features(generate_pair("pour", 11, 0.2, opt), feature_dim, 7, 0.01));
    pairs.push_back(synth_features(generate_pair("hang", 12, 0.2, opt), feature_dim, 7, 0.01));
    return pairs;
}

ModelConfig tiny_config() {
    ModelConfig cfg = ModelConfig::small();
    cfg.channels = 2;
    cfg.epochs = 5;
    return cfg;
}

}  // namespace

TEST_CASE("training bookkeeping and determinism") {
    auto pairs = tiny_train_set(48, ModelConfig::small().feature_dim);
    ModelConfig cfg = tiny_config();

    TrainResult a = train_one_shot(pairs, cfg);
    CHECK(a.loss_history.size() == static_cast<size_t>(cfg.epochs) * pairs.size());
    for (double l : a.loss_history) CHECK(std::isfinite(l));

    TrainResult b = train_one_shot(pairs, cfg);
    bool identical = true;
    visit_params(a.net.params, [&](const std::string& name, MatT<float>& m) {
        MatT<float>* other = nullptr;
        visit_params(b.net.params, [&](const std::string& n2, MatT<float>& m2) {
            if (n2 == name) other = &m2;
        });
        REQUIRE(other != nullptr);
        if (m != *other) identical = false;
    });
    CHECK(identical);

    SUBCASE("prediction has the right shape and range") {
        auto [ms, mt] = predict(a.net, pairs[0]);
        CHECK(ms.rows() == pairs[0].source.size());
        CHECK(ms.cols() == cfg.channels);
        CHECK(mt.rows() == pairs[0].target.size());
        CHECK(ms.minCoeff() > 0.0);
        CHECK(ms.maxCoeff() < 1.0);
    }
}

TEST_CASE("smoothed training loss decreases on one pair") {
    SynthOptions opt;
    opt.n_points = 48;
    opt.n_channels = 2;
    std::vector<ObjectPair> pairs = {
        synth_features(generate_pair("pour", 11, 0.2, opt), 8, 7, 0.01)};
    ModelConfig cfg = tiny_config();
    cfg.epochs = 50;
    cfg.learning_rate = 1e-3;

    TrainResult r = train_one_shot(pairs, cfg);
    auto window = [&](size_t start) {
        double s = 0.0;
        for (size_t i = start; i < start + 10; ++i) s += r.loss_history[i];
        return s / 10.0;
    };
    CHECK(window(40) < window(0));
}

TEST_CASE("checkpoints round-trip bitwise") {
    TempDir dir;
    ModelConfig cfg = tiny_config();
    cfg.seed = 21;
    Net<float> net(cfg);
    std::string path = dir.file("model.ckpt");
    save_checkpoint(net, path);
    Net<float> back = load_checkpoint(path);

    CHECK(back.cfg.to_json() == cfg.to_json());
    visit_params(net.params, [&](const std::string& name, MatT<float>& m) {
        visit_params(back.params, [&](const std::string& n2, MatT<float>& m2) {
            if (n2 == name) CHECK(m == m2);
        });
    });

    SUBCASE("bad magic is rejected") {
        std::ofstream bad(dir.file("bad.ckpt"));
        bad << "NOPE 1\n";
        bad.close();
        CHECK_THROWS_AS(load_checkpoint(dir.file("bad.ckpt")), std::runtime_error);
    }
}

TEST_CASE("gradients agree with central finite differences") {
    GradCheckReport report = grad_check(ModelConfig::small());
    CHECK(report.max_rel_error < 1e-4);
    CHECK(!report.per_tensor.empty());
    for (const auto& [name, err] : report.per_tensor) CHECK(std::isfinite(err));
}

TEST_CASE("patch embedding dump is complete, finite, and reproducible") {
    TempDir dir;
    auto pairs = tiny_train_set(48, ModelConfig::small().feature_dim);
    ModelConfig cfg = tiny_config();
    Net<float> net(cfg);

    std::string p1 = dir.file("emb1.txt"), p2 = dir.file("emb2.txt");
    dump_patch_embeddings(net, pairs, p1);
    dump_patch_embeddings(net, pairs, p2);

    std::ifstream in(p1);
    std::string magic;
    int version = 0, rows = 0, dim = 0;
    in >> magic >> version >> rows >> dim;
    CHECK(magic == "ooaf-emb");
    CHECK(rows == static_cast<int>(pairs.size()) * 2 * cfg.num_groups);
    CHECK(dim == cfg.token_dim);
    for (int r = 0; r < rows; ++r) {
        for (int cidx = 0; cidx < dim; ++cidx) {
            double v = 0.0;
            REQUIRE((in >> v));
            CHECK(std::isfinite(v));
        }
        int part = 0, cat = 0;
        REQUIRE((in >> part >> cat));
    }

    std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
}
