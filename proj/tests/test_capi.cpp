#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <ooaf/ooaf.h>

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("ooaf_capi_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

constexpr const char* kSmallConfig = R"({
    "token_dim": 32, "num_groups": 8, "group_size": 8, "group_radius": 0.5,
    "patch_hidden": [48, 32], "pos_dim": 32, "heads": 4, "dropout": 0.0,
    "decoder_blocks": 2, "ff_hidden": 64, "head_hidden": [32, 16],
    "channels": 5, "feature_dim": 8, "epochs": 2})";

}  // namespace

TEST_CASE("cloud create, accessors, and file round-trip") {
    const double pts[6] = {0, 0, 0, 1, 2, 3};
    const double feats[4] = {0.5, -0.5, 1.5, -1.5};
    const double aff[2] = {0.25, 0.75};
    const int32_t parts[2] = {3, 4};

    ooaf_cloud* cloud = nullptr;
    REQUIRE(ooaf_cloud_create(2, 2, 1, pts, feats, aff, parts, &cloud) == OOAF_OK);
    CHECK(ooaf_cloud_size(cloud) == 2);
    CHECK(ooaf_cloud_feature_dim(cloud) == 2);
    CHECK(ooaf_cloud_channels(cloud) == 1);
    CHECK(ooaf_cloud_has_parts(cloud) == 1);

    double back[6] = {};
    REQUIRE(ooaf_cloud_points(cloud, back) == OOAF_OK);
    for (int i = 0; i < 6; ++i) CHECK(back[i] == pts[i]);
    double aff_back[2] = {};
    REQUIRE(ooaf_cloud_affordance(cloud, aff_back) == OOAF_OK);
    CHECK(aff_back[1] == 0.75);
    int32_t parts_back[2] = {};
    REQUIRE(ooaf_cloud_parts(cloud, parts_back) == OOAF_OK);
    CHECK(parts_back[0] == 3);

    TempDir dir;
    std::string path = dir.file("c.pc");
    REQUIRE(ooaf_cloud_save(cloud, path.c_str()) == OOAF_OK);
    ooaf_cloud* loaded = nullptr;
    REQUIRE(ooaf_cloud_load(path.c_str(), &loaded) == OOAF_OK);
    CHECK(ooaf_cloud_size(loaded) == 2);
    double feats_back[4] = {};
    REQUIRE(ooaf_cloud_features(loaded, feats_back) == OOAF_OK);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(feats_back[i] - feats[i]) < 1e-9);

    ooaf_cloud_free(loaded);
    ooaf_cloud_free(cloud);
}

TEST_CASE("failures set the error message and leave out-params untouched") {
    ooaf_cloud* sentinel = reinterpret_cast<ooaf_cloud*>(0x1);
    ooaf_cloud* out = sentinel;
    ooaf_status st = ooaf_cloud_load("/nonexistent/file.pc", &out);
    CHECK(st != OOAF_OK);
    CHECK(out == sentinel);
    CHECK(std::strlen(ooaf_last_error()) > 0);

    out = sentinel;
    CHECK(ooaf_cloud_create(2, 0, 0, nullptr, nullptr, nullptr, nullptr, &out) ==
          OOAF_ERR_INVALID_ARGUMENT);
    CHECK(out == sentinel);

    ooaf_cloud* src = nullptr;
    ooaf_cloud* tgt = nullptr;
    CHECK(ooaf_generate_pair("fly", 1, 0.1, 64, 8, 7, 0.0, 0, &src, &tgt) ==
          OOAF_ERR_INVALID_ARGUMENT);
    CHECK(src == nullptr);
    CHECK(std::string(ooaf_last_error()).find("category") != std::string::npos);
}

TEST_CASE("se3 transform through the C surface") {
    const double pts[3] = {1, 0, 0};
    ooaf_cloud* cloud = nullptr;
    REQUIRE(ooaf_cloud_create(1, 0, 0, pts, nullptr, nullptr, nullptr, &cloud) == OOAF_OK);
    // 90 degrees about z
    const double rot[9] = {0, -1, 0, 1, 0, 0, 0, 0, 1};
    const double trans[3] = {0.5, 0, 0};
    ooaf_cloud* moved = nullptr;
    REQUIRE(ooaf_se3_apply(rot, trans, cloud, &moved) == OOAF_OK);
    double out[3] = {};
    REQUIRE(ooaf_cloud_points(moved, out) == OOAF_OK);
    CHECK(std::abs(out[0] - 0.5) < 1e-12);
    CHECK(std::abs(out[1] - 1.0) < 1e-12);
    ooaf_cloud_free(moved);
    ooaf_cloud_free(cloud);
}

TEST_CASE("synthetic generation, label propagation, and occlusion") {
    ooaf_cloud* src = nullptr;
    ooaf_cloud* tgt = nullptr;
    REQUIRE(ooaf_generate_pair("pour", 3, 0.2, 256, 8, 7, 0.0, 0, &src, &tgt) == OOAF_OK);
    CHECK(ooaf_cloud_size(src) == 256);
    CHECK(ooaf_cloud_feature_dim(src) == 8);
    CHECK(ooaf_cloud_channels(src) == 5);
    CHECK(ooaf_cloud_has_parts(tgt) == 1);

    SUBCASE("feature mode 1 zeroes the features") {
        ooaf_cloud* s2 = nullptr;
        ooaf_cloud* t2 = nullptr;
        REQUIRE(ooaf_generate_pair("pour", 3, 0.2, 64, 8, 7, 0.0, 1, &s2, &t2) == OOAF_OK);
        std::vector<double> f(64 * 8, 1.0);
        REQUIRE(ooaf_cloud_features(s2, f.data()) == OOAF_OK);
        for (double v : f) CHECK(v == 0.0);
        ooaf_cloud_free(s2);
        ooaf_cloud_free(t2);
    }
    SUBCASE("propagated labels peak at the contact") {
        std::vector<double> pts(256 * 3);
        REQUIRE(ooaf_cloud_points(src, pts.data()) == OOAF_OK);
        ooaf_cloud* labeled = nullptr;
        REQUIRE(ooaf_propagate_labels(src, 2, pts.data(), 1, 0.06, &labeled) == OOAF_OK);
        std::vector<double> aff(256 * 5);
        REQUIRE(ooaf_cloud_affordance(labeled, aff.data()) == OOAF_OK);
        CHECK(aff[2] == doctest::Approx(1.0).epsilon(1e-12));  // point 0, channel 2
        ooaf_cloud_free(labeled);
    }
    SUBCASE("occlusion removes the expected fraction") {
        ooaf_cloud* occ = nullptr;
        REQUIRE(ooaf_apply_occlusion(src, 0.3, 11, &occ) == OOAF_OK);
        double kept = static_cast<double>(ooaf_cloud_size(occ)) / 256.0;
        CHECK(kept >= 0.68 - 1e-9);
        CHECK(kept <= 0.72 + 1e-9);
        ooaf_cloud_free(occ);
    }

    ooaf_cloud_free(src);
    ooaf_cloud_free(tgt);
}

TEST_CASE("metrics through the C surface") {
    const double gt[4] = {1, 1, 0, 0};
    const double pred[4] = {1, 1, 0, 0};
    double out = -1.0;
    REQUIRE(ooaf_metric_aiou(pred, gt, 4, &out) == OOAF_OK);
    CHECK(out == doctest::Approx(100.0).epsilon(1e-12));
    REQUIRE(ooaf_metric_sim(pred, gt, 4, &out) == OOAF_OK);
    CHECK(out == doctest::Approx(1.0).epsilon(1e-12));
    REQUIRE(ooaf_metric_mae(pred, gt, 4, &out) == OOAF_OK);
    CHECK(out == 0.0);
    REQUIRE(ooaf_metric_auc(pred, gt, 4, &out) == OOAF_OK);
    CHECK(out == doctest::Approx(100.0).epsilon(1e-12));

    const double ones[4] = {1, 1, 1, 1};
    double sentinel = -7.0;
    CHECK(ooaf_metric_auc(pred, ones, 4, &sentinel) != OOAF_OK);
    CHECK(sentinel == -7.0);
}

TEST_CASE("train, predict, evaluate, checkpoint, embeddings") {
    TempDir dir;
    std::string root = dir.file("data");
    REQUIRE(ooaf_write_dataset(root.c_str(), 1, 0.3, 1, 7, 8, 0.02, 0, 64) == OOAF_OK);

    ooaf_model* model = nullptr;
    double* loss = nullptr;
    int64_t loss_len = 0;
    REQUIRE(ooaf_train(root.c_str(), kSmallConfig, 3, &model, &loss, &loss_len) == OOAF_OK);
    CHECK(loss_len == 2 * 5);  // epochs x categories
    for (int64_t i = 0; i < loss_len; ++i) CHECK(std::isfinite(loss[i]));
    ooaf_loss_history_free(loss);

    SUBCASE("config json reflects the training config") {
        char* cfg = nullptr;
        REQUIRE(ooaf_model_config_json(model, &cfg) == OOAF_OK);
        CHECK(std::string(cfg).find("\"token_dim\":32") != std::string::npos);
        ooaf_string_free(cfg);
    }
    SUBCASE("predict fills all channels") {
        ooaf_cloud* src = nullptr;
        ooaf_cloud* tgt = nullptr;
        REQUIRE(ooaf_generate_pair("hang", 21, 0.3, 64, 8, 7, 0.02, 0, &src, &tgt) == OOAF_OK);
        ooaf_cloud* ps = nullptr;
        ooaf_cloud* pt = nullptr;
        REQUIRE(ooaf_predict(model, src, tgt, &ps, &pt) == OOAF_OK);
        CHECK(ooaf_cloud_size(ps) == 64);
        CHECK(ooaf_cloud_channels(ps) == 5);
        std::vector<double> aff(64 * 5);
        REQUIRE(ooaf_cloud_affordance(pt, aff.data()) == OOAF_OK);
        for (double v : aff) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
        ooaf_cloud_free(ps);
        ooaf_cloud_free(pt);
        ooaf_cloud_free(src);
        ooaf_cloud_free(tgt);
    }
    SUBCASE("evaluation emits means and reports") {
        double ai = -1, si = -1, ma = -1, au = -1;
        char* json = nullptr;
        char* table = nullptr;
        REQUIRE(ooaf_evaluate(model, root.c_str(), -1.0, 0, &ai, &si, &ma, &au, &json, &table) ==
                OOAF_OK);
        CHECK(ai >= 0.0);
        CHECK(ai <= 100.0);
        CHECK(si >= 0.0);
        CHECK(si <= 1.0);
        CHECK(std::string(json).find("breakdown") != std::string::npos);
        CHECK(std::string(table).find("IOU") != std::string::npos);
        ooaf_string_free(json);
        ooaf_string_free(table);
    }
    SUBCASE("model round-trips through a checkpoint") {
        std::string ckpt = dir.file("m.ckpt");
        REQUIRE(ooaf_model_save(model, ckpt.c_str()) == OOAF_OK);
        ooaf_model* loaded = nullptr;
        REQUIRE(ooaf_model_load(ckpt.c_str(), &loaded) == OOAF_OK);

        ooaf_cloud* src = nullptr;
        ooaf_cloud* tgt = nullptr;
        REQUIRE(ooaf_generate_pair("cut", 5, 0.3, 64, 8, 7, 0.02, 0, &src, &tgt) == OOAF_OK);
        ooaf_cloud *a = nullptr, *b = nullptr, *c = nullptr, *d = nullptr;
        REQUIRE(ooaf_predict(model, src, tgt, &a, &b) == OOAF_OK);
        REQUIRE(ooaf_predict(loaded, src, tgt, &c, &d) == OOAF_OK);
        std::vector<double> m1(64 * 5), m2(64 * 5);
        REQUIRE(ooaf_cloud_affordance(a, m1.data()) == OOAF_OK);
        REQUIRE(ooaf_cloud_affordance(c, m2.data()) == OOAF_OK);
        CHECK(m1 == m2);
        for (auto* cl : {a, b, c, d, src, tgt}) ooaf_cloud_free(cl);
        ooaf_model_free(loaded);
    }
    SUBCASE("embedding dump writes a well-formed file") {
        std::string path = dir.file("emb.txt");
        REQUIRE(ooaf_dump_embeddings(model, root.c_str(), path.c_str()) == OOAF_OK);
        CHECK(fs::file_size(path) > 0);
    }

    ooaf_model_free(model);
}

TEST_CASE("gradient check through the C surface") {
    double max_err = -1.0;
    char* report = nullptr;
    REQUIRE(ooaf_grad_check(nullptr, &max_err, &report) == OOAF_OK);
    CHECK(max_err >= 0.0);
    CHECK(max_err < 1e-4);
    CHECK(std::string(report).find("enc1_w") != std::string::npos);
    ooaf_string_free(report);
}

TEST_CASE("specs and pose optimization through the C surface") {
    ooaf_spec* spec = nullptr;
    REQUIRE(ooaf_spec_builtin("pour", &spec) == OOAF_OK);
    CHECK(ooaf_spec_num_terms(spec) == 4);

    char* json = nullptr;
    REQUIRE(ooaf_spec_to_json(spec, &json) == OOAF_OK);
    ooaf_spec* reparsed = nullptr;
    REQUIRE(ooaf_spec_parse(json, &reparsed) == OOAF_OK);
    CHECK(ooaf_spec_num_terms(reparsed) == 4);
    ooaf_string_free(json);
    ooaf_spec_free(reparsed);

    ooaf_spec* bad = reinterpret_cast<ooaf_spec*>(0x1);
    CHECK(ooaf_spec_parse("{not json", &bad) != OOAF_OK);
    CHECK(bad == reinterpret_cast<ooaf_spec*>(0x1));

    ooaf_cloud* src = nullptr;
    ooaf_cloud* tgt = nullptr;
    REQUIRE(ooaf_generate_pair("pour", 4, 0.2, 128, 0, 7, 0.0, 1, &src, &tgt) == OOAF_OK);

    SUBCASE("objective returns the weighted per-term sum") {
        const double rot[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
        const double trans[3] = {0.1, 0, 0.2};
        double total = -1.0;
        double per_term[4] = {};
        REQUIRE(ooaf_objective(spec, src, tgt, 0, rot, trans, &total, per_term) == OOAF_OK);
        // weights 0.3 / 0.2 / 0.3 / 0.1
        double expect = 0.3 * per_term[0] + 0.2 * per_term[1] + 0.3 * per_term[2] +
                        0.1 * per_term[3];
        CHECK(total == doctest::Approx(expect).epsilon(1e-9));
    }
    SUBCASE("solve is deterministic and reports its restart") {
        double rot1[9], trans1[3], rot2[9], trans2[3];
        double score1 = 0, score2 = 0;
        int best1 = -1, best2 = -1;
        REQUIRE(ooaf_solve(spec, src, tgt, 0, 3, 60, 9, rot1, trans1, &score1, nullptr, &best1) ==
                OOAF_OK);
        REQUIRE(ooaf_solve(spec, src, tgt, 0, 3, 60, 9, rot2, trans2, &score2, nullptr, &best2) ==
                OOAF_OK);
        CHECK(score1 == score2);
        CHECK(best1 == best2);
        for (int i = 0; i < 9; ++i) CHECK(rot1[i] == rot2[i]);
        for (int i = 0; i < 3; ++i) CHECK(trans1[i] == trans2[i]);
        CHECK(best1 >= 0);
        CHECK(std::isfinite(score1));
    }

    ooaf_cloud_free(src);
    ooaf_cloud_free(tgt);
    ooaf_spec_free(spec);
}
