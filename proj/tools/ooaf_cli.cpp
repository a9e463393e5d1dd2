// Command-line front end for the ooaf library. Every subcommand goes through
// the public C interface; this file only does argument handling, file-name
// bookkeeping, and simple text/image serialization.
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ooaf/ooaf.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliError {
    int exit_code;
    std::string message;
};

[[noreturn]] void fail_validation(const std::string& msg) { throw CliError{2, msg}; }
[[noreturn]] void fail_runtime(const std::string& msg) { throw CliError{1, msg}; }

void check(ooaf_status st) {
    if (st == OOAF_OK) return;
    std::string msg = ooaf_last_error();
    if (st == OOAF_ERR_INVALID_ARGUMENT || st == OOAF_ERR_PARSE) fail_validation(msg);
    fail_runtime(msg);
}

using CloudPtr = std::unique_ptr<ooaf_cloud, decltype(&ooaf_cloud_free)>;
using ModelPtr = std::unique_ptr<ooaf_model, decltype(&ooaf_model_free)>;
using SpecPtr = std::unique_ptr<ooaf_spec, decltype(&ooaf_spec_free)>;

CloudPtr load_cloud(const std::string& path) {
    ooaf_cloud* c = nullptr;
    check(ooaf_cloud_load(path.c_str(), &c));
    return {c, &ooaf_cloud_free};
}

ModelPtr load_model(const std::string& path) {
    ooaf_model* m = nullptr;
    check(ooaf_model_load(path.c_str(), &m));
    return {m, &ooaf_model_free};
}

std::string take_string(char* s) {
    std::string out = s ? s : "";
    ooaf_string_free(s);
    return out;
}

std::string out_path(const std::string& out_dir, const std::string& name) {
    fs::create_directories(out_dir);
    return (fs::path(out_dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail_runtime("cannot open " + path);
    f << text;
    if (!f) fail_runtime("cannot write " + path);
}

// --config JSON: values apply to every option the command line left unset
json load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail_validation("cannot open config file " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        fail_validation(std::string("config file: ") + e.what());
    }
    if (!j.is_object()) fail_validation("config file must hold a JSON object");
    return j;
}

template <typename T>
void apply_cfg(const json& cfg, CLI::Option* opt, const std::string& key, T& value) {
    if (opt->count() == 0 && cfg.contains(key)) {
        try {
            value = cfg.at(key).get<T>();
        } catch (const json::exception& e) {
            fail_validation("config key '" + key + "': " + e.what());
        }
    }
}

uint64_t resolve_seed(CLI::Option* seed_opt, uint64_t seed_value) {
    if (seed_opt->count() > 0) return seed_value;
    if (const char* env = std::getenv("OOAF_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            fail_validation("OOAF_SEED is not an integer");
        }
    }
    return seed_value;
}

int parse_feature_mode(const std::string& mode) {
    if (mode == "parts") return 0;
    if (mode == "none") return 1;
    fail_validation("feature mode must be 'parts' or 'none'");
}

// piecewise-linear jet-style color map over [0,1]
void heat_color(double a, unsigned char rgb[3]) {
    auto band = [](double x) { return std::max(0.0, std::min(1.0, 1.5 - std::abs(x))); };
    rgb[0] = static_cast<unsigned char>(255.0 * band(4.0 * a - 3.0) + 0.5);
    rgb[1] = static_cast<unsigned char>(255.0 * band(4.0 * a - 2.0) + 0.5);
    rgb[2] = static_cast<unsigned char>(255.0 * band(4.0 * a - 1.0) + 0.5);
}

std::string format_double(double v) {
    std::ostringstream s;
    s.precision(12);
    s << v;
    return s.str();
}

struct PoseJson {
    const double* rotation;
    const double* translation;
};

json pose_to_json(const double* rotation, const double* translation) {
    json jr = json::array(), jt = json::array();
    for (int r = 0; r < 3; ++r) {
        json row = json::array();
        for (int c = 0; c < 3; ++c) row.push_back(rotation[3 * r + c]);
        jr.push_back(row);
    }
    for (int i = 0; i < 3; ++i) jt.push_back(translation[i]);
    return {{"rotation", jr}, {"translation", jt}};
}

struct GlobalArgs {
    uint64_t seed = 0;
    int threads = 1;
    int verbosity = 0;
    std::string config_path;
    CLI::Option* seed_opt = nullptr;
    json cfg = json::object();
    bool finished = false;

    // resolve the config file and seed fallbacks; called at the start of every
    // subcommand callback (they run before parse() returns)
    void finish() {
        if (finished) return;
        finished = true;
        if (!config_path.empty()) cfg = load_config_file(config_path);
        seed = resolve_seed(seed_opt, seed);
        if (cfg.contains("seed") && seed_opt->count() == 0 && !std::getenv("OOAF_SEED"))
            seed = cfg.at("seed").get<uint64_t>();
    }
};

int run(int argc, char** argv) {
    CLI::App app{"One-shot object-to-object affordance grounding toolkit"};
    app.require_subcommand(1);

    GlobalArgs g;
    g.seed_opt = app.add_option("--seed", g.seed, "Global random seed (env OOAF_SEED as fallback)");
    app.add_option("--threads", g.threads, "Worker threads (1 = fully deterministic)")
        ->check(CLI::PositiveNumber);
    app.add_option("--config", g.config_path, "JSON config file; command-line flags win");
    app.add_flag("-v,--verbose", g.verbosity, "Increase verbosity");

    // ---- gen-synth ----
    auto* gen = app.add_subcommand("gen-synth", "Generate the synthetic one-shot dataset");
    struct {
        std::string out;
        int n_eval = 10;
        double perturbation = 0.3;
        uint64_t feature_seed = 7;
        int feature_dim = 64;
        double feature_noise = 0.02;
        std::string feature_mode = "parts";
        int n_points = 2048;
    } ga;
    gen->add_option("--out", ga.out, "Output dataset directory")->required();
    auto* ga_ne = gen->add_option("--n-eval", ga.n_eval, "Held-out instances per category");
    auto* ga_pe = gen->add_option("--perturbation", ga.perturbation, "Instance jitter in [0,0.5]");
    auto* ga_fs = gen->add_option("--feature-seed", ga.feature_seed, "Feature bank seed");
    auto* ga_fd = gen->add_option("--feature-dim", ga.feature_dim, "Semantic feature width");
    auto* ga_fn = gen->add_option("--feature-noise", ga.feature_noise, "Feature noise sigma");
    auto* ga_fm = gen->add_option("--feature-mode", ga.feature_mode, "parts|none");
    auto* ga_np = gen->add_option("--n-points", ga.n_points, "Points per object");
    gen->callback([&] {
        g.finish();
        apply_cfg(g.cfg, ga_ne, "n_eval", ga.n_eval);
        apply_cfg(g.cfg, ga_pe, "perturbation", ga.perturbation);
        apply_cfg(g.cfg, ga_fs, "feature_seed", ga.feature_seed);
        apply_cfg(g.cfg, ga_fd, "feature_dim", ga.feature_dim);
        apply_cfg(g.cfg, ga_fn, "feature_noise", ga.feature_noise);
        apply_cfg(g.cfg, ga_fm, "feature_mode", ga.feature_mode);
        apply_cfg(g.cfg, ga_np, "n_points", ga.n_points);
        fs::create_directories(ga.out);
        check(ooaf_write_dataset(ga.out.c_str(), ga.n_eval, ga.perturbation, g.seed,
                                 ga.feature_seed, ga.feature_dim, ga.feature_noise,
                                 parse_feature_mode(ga.feature_mode), ga.n_points));
        if (g.verbosity > 0) std::cout << "dataset written to " << ga.out << "\n";
    });

    // ---- fuse ----
    auto* fuse = app.add_subcommand("fuse", "Fuse multi-view feature maps onto a point cloud");
    struct {
        std::string cloud;
        std::vector<std::string> cameras;
        double mu = 0.02;
        std::string out;
    } fa;
    fuse->add_option("--cloud", fa.cloud, "Input cloud (points used, features ignored)")
        ->required();
    fuse->add_option("--camera", fa.cameras, "Camera description JSON (repeatable)")->required();
    auto* fa_mu = fuse->add_option("--mu", fa.mu, "Depth truncation margin (meters)");
    fuse->add_option("--out", fa.out, "Output directory")->required();
    fuse->callback([&] {
        g.finish();
        apply_cfg(g.cfg, fa_mu, "mu", fa.mu);
        CloudPtr base = load_cloud(fa.cloud);
        std::vector<const char*> cams;
        for (const auto& c : fa.cameras) cams.push_back(c.c_str());
        std::vector<int32_t> coverage(static_cast<size_t>(ooaf_cloud_size(base.get())));
        ooaf_cloud* fused = nullptr;
        check(ooaf_fuse(base.get(), cams.data(), static_cast<int>(cams.size()), fa.mu, &fused,
                        coverage.data()));
        CloudPtr fused_ptr(fused, &ooaf_cloud_free);
        check(ooaf_cloud_save(fused, out_path(fa.out, "fused.pc").c_str()));
        std::ostringstream csv;
        csv << "point,views\n";
        for (size_t i = 0; i < coverage.size(); ++i) csv << i << "," << coverage[i] << "\n";
        write_text(out_path(fa.out, "coverage.csv"), csv.str());
    });

    // ---- annotate ----
    auto* ann = app.add_subcommand("annotate", "Propagate contact annotations into a label channel");
    struct {
        std::string cloud;
        std::string contacts;
        int channel = 0;
        double sigma = 0.06;
        std::string out;
    } aa;
    ann->add_option("--cloud", aa.cloud, "Input cloud")->required();
    ann->add_option("--contacts", aa.contacts, "JSON file: [[x,y,z], ...]")->required();
    auto* aa_ch = ann->add_option("--channel", aa.channel, "Affordance channel index");
    auto* aa_sg = ann->add_option("--sigma", aa.sigma, "Gaussian bandwidth");
    ann->add_option("--out", aa.out, "Output directory")->required();
    ann->callback([&] {
        g.finish();
        apply_cfg(g.cfg, aa_ch, "channel", aa.channel);
        apply_cfg(g.cfg, aa_sg, "sigma", aa.sigma);
        std::ifstream f(aa.contacts);
        if (!f) fail_validation("cannot open contacts file " + aa.contacts);
        json j;
        try {
            f >> j;
        } catch (const json::exception& e) {
            fail_validation(std::string("contacts file: ") + e.what());
        }
        if (!j.is_array() || j.empty()) fail_validation("contacts file must hold a point array");
        std::vector<double> contacts;
        for (const auto& p : j) {
            if (!p.is_array() || p.size() != 3) fail_validation("each contact must be [x,y,z]");
            for (int k = 0; k < 3; ++k) contacts.push_back(p[static_cast<size_t>(k)].get<double>());
        }
        CloudPtr cloud = load_cloud(aa.cloud);
        ooaf_cloud* labeled = nullptr;
        check(ooaf_propagate_labels(cloud.get(), aa.channel, contacts.data(),
                                    static_cast<int>(contacts.size() / 3), aa.sigma, &labeled));
        CloudPtr labeled_ptr(labeled, &ooaf_cloud_free);
        check(ooaf_cloud_save(labeled, out_path(aa.out, "labeled.pc").c_str()));
    });

    // ---- train ----
    auto* train = app.add_subcommand("train", "One-shot training on a dataset's train split");
    struct {
        std::string data;
        std::string model_config;
        std::string out;
    } ta;
    train->add_option("--data", ta.data, "Dataset root directory")->required();
    train->add_option("--model-config", ta.model_config, "Model configuration JSON file");
    train->add_option("--out", ta.out, "Output directory")->required();
    train->callback([&] {
        g.finish();
        std::string cfg_text;
        if (!ta.model_config.empty()) {
            std::ifstream f(ta.model_config);
            if (!f) fail_validation("cannot open model config " + ta.model_config);
            std::stringstream ss;
            ss << f.rdbuf();
            cfg_text = ss.str();
        } else if (g.cfg.contains("model")) {
            cfg_text = g.cfg.at("model").dump();
        }
        ooaf_model* model = nullptr;
        double* losses = nullptr;
        int64_t n_losses = 0;
        check(ooaf_train(ta.data.c_str(), cfg_text.empty() ? nullptr : cfg_text.c_str(), g.seed,
                         &model, &losses, &n_losses));
        ModelPtr model_ptr(model, &ooaf_model_free);
        check(ooaf_model_save(model, out_path(ta.out, "model.ckpt").c_str()));
        std::ostringstream csv;
        csv << "step,loss\n";
        for (int64_t i = 0; i < n_losses; ++i) csv << i << "," << format_double(losses[i]) << "\n";
        ooaf_loss_history_free(losses);
        write_text(out_path(ta.out, "loss.csv"), csv.str());
    });

    // ---- predict ----
    auto* pred = app.add_subcommand("predict", "Predict affordance maps for a source/target pair");
    struct {
        std::string model;
        std::string src;
        std::string tgt;
        std::string out;
    } pa;
    pred->add_option("--model", pa.model, "Checkpoint path")->required();
    pred->add_option("--src", pa.src, "Source cloud")->required();
    pred->add_option("--tgt", pa.tgt, "Target cloud")->required();
    pred->add_option("--out", pa.out, "Output directory")->required();
    pred->callback([&] {
        g.finish();
        ModelPtr model = load_model(pa.model);
        CloudPtr src = load_cloud(pa.src);
        CloudPtr tgt = load_cloud(pa.tgt);
        ooaf_cloud *src_pred = nullptr, *tgt_pred = nullptr;
        check(ooaf_predict(model.get(), src.get(), tgt.get(), &src_pred, &tgt_pred));
        CloudPtr sp(src_pred, &ooaf_cloud_free), tp(tgt_pred, &ooaf_cloud_free);
        check(ooaf_cloud_save(src_pred, out_path(pa.out, "src_pred.pc").c_str()));
        check(ooaf_cloud_save(tgt_pred, out_path(pa.out, "tgt_pred.pc").c_str()));
    });

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset's eval split");
    struct {
        std::string model;
        std::string data;
        std::string out;
    } ea;
    eval->add_option("--model", ea.model, "Checkpoint path")->required();
    eval->add_option("--data", ea.data, "Dataset root directory")->required();
    eval->add_option("--out", ea.out, "Output directory")->required();
    eval->callback([&] {
        g.finish();
        ModelPtr model = load_model(ea.model);
        char *jrep = nullptr, *trep = nullptr;
        check(ooaf_evaluate(model.get(), ea.data.c_str(), -1.0, 0, nullptr, nullptr, nullptr,
                            nullptr, &jrep, &trep));
        std::string table = take_string(trep);
        write_text(out_path(ea.out, "report.json"), take_string(jrep));
        write_text(out_path(ea.out, "report.txt"), table);
        std::cout << table;
    });

    // ---- occlude-eval ----
    auto* occ = app.add_subcommand("occlude-eval", "Evaluate across a sweep of occlusion levels");
    struct {
        std::string model;
        std::string data;
        std::string levels = "10,20,30,40,50";
        std::string out;
    } oa;
    occ->add_option("--model", oa.model, "Checkpoint path")->required();
    occ->add_option("--data", oa.data, "Dataset root directory")->required();
    auto* oa_lv = occ->add_option("--levels", oa.levels, "Comma-separated occlusion percentages");
    occ->add_option("--out", oa.out, "Output directory")->required();
    occ->callback([&] {
        g.finish();
        apply_cfg(g.cfg, oa_lv, "levels", oa.levels);
        std::vector<double> levels;
        std::stringstream ss(oa.levels);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                levels.push_back(std::stod(item) / 100.0);
            } catch (const std::exception&) {
                fail_validation("bad occlusion level: " + item);
            }
        }
        if (levels.empty()) fail_validation("no occlusion levels given");
        ModelPtr model = load_model(oa.model);
        std::ostringstream csv;
        csv << "level,aiou,sim,mae,auc\n";
        for (double level : levels) {
            double aiou = 0, sim = 0, mae = 0, auc = 0;
            check(ooaf_evaluate(model.get(), oa.data.c_str(), level, g.seed, &aiou, &sim, &mae,
                                &auc, nullptr, nullptr));
            csv << format_double(level * 100.0) << "," << format_double(aiou) << ","
                << format_double(sim) << "," << format_double(mae) << "," << format_double(auc)
                << "\n";
        }
        write_text(out_path(oa.out, "occlusion.csv"), csv.str());
        std::cout << csv.str();
    });

    // ---- optimize-pose ----
    auto* opt = app.add_subcommand("optimize-pose", "Optimize an SE(3) pose under a constraint spec");
    struct {
        std::string spec;
        std::string task;
        std::string src;
        std::string tgt;
        int channel = 0;
        int restarts = 32;
        int iters = 500;
        std::string out;
    } sa;
    opt->add_option("--spec", sa.spec, "Constraint spec JSON file");
    opt->add_option("--task", sa.task, "Built-in spec: pour|hang|cut|press|insert");
    opt->add_option("--src", sa.src, "Source cloud (with affordance)")->required();
    opt->add_option("--tgt", sa.tgt, "Target cloud (with affordance)")->required();
    auto* sa_ch = opt->add_option("--channel", sa.channel, "Affordance channel");
    auto* sa_rs = opt->add_option("--restarts", sa.restarts, "Random restarts");
    auto* sa_it = opt->add_option("--iters", sa.iters, "Local iterations per restart");
    opt->add_option("--out", sa.out, "Output directory")->required();
    opt->callback([&] {
        g.finish();
        apply_cfg(g.cfg, sa_ch, "channel", sa.channel);
        apply_cfg(g.cfg, sa_rs, "restarts", sa.restarts);
        apply_cfg(g.cfg, sa_it, "iters", sa.iters);
        if (sa.spec.empty() == sa.task.empty())
            fail_validation("give exactly one of --spec or --task");
        ooaf_spec* spec = nullptr;
        if (!sa.spec.empty())
            check(ooaf_spec_load(sa.spec.c_str(), &spec));
        else
            check(ooaf_spec_builtin(sa.task.c_str(), &spec));
        SpecPtr spec_ptr(spec, &ooaf_spec_free);
        CloudPtr src = load_cloud(sa.src);
        CloudPtr tgt = load_cloud(sa.tgt);
        double rotation[9], translation[3], score = 0;
        std::vector<double> per_term(static_cast<size_t>(ooaf_spec_num_terms(spec)));
        int best_restart = -1;
        check(ooaf_solve(spec, src.get(), tgt.get(), sa.channel, sa.restarts, sa.iters, g.seed,
                         rotation, translation, &score, per_term.data(), &best_restart));
        json j = pose_to_json(rotation, translation);
        j["total_score"] = score;
        j["per_term"] = per_term;
        j["best_restart"] = best_restart;
        j["restarts"] = sa.restarts;
        write_text(out_path(sa.out, "pose.json"), j.dump(2) + "\n");
        if (g.verbosity > 0) std::cout << "score " << score << "\n";
    });

    // ---- render ----
    auto* render = app.add_subcommand("render", "Colorize a cloud by affordance and write a heatmap");
    struct {
        std::string cloud;
        int channel = 0;
        int resolution = 256;
        std::string out;
    } ra;
    render->add_option("--cloud", ra.cloud, "Input cloud with affordance")->required();
    auto* ra_ch = render->add_option("--channel", ra.channel, "Affordance channel");
    auto* ra_rs = render->add_option("--resolution", ra.resolution, "Heatmap pixels per side");
    render->add_option("--out", ra.out, "Output directory")->required();
    render->callback([&] {
        g.finish();
        apply_cfg(g.cfg, ra_ch, "channel", ra.channel);
        apply_cfg(g.cfg, ra_rs, "resolution", ra.resolution);
        if (ra.resolution < 8 || ra.resolution > 4096)
            fail_validation("resolution must be in [8, 4096]");
        CloudPtr cloud = load_cloud(ra.cloud);
        const int64_t n = ooaf_cloud_size(cloud.get());
        const int64_t k = ooaf_cloud_channels(cloud.get());
        if (ra.channel < 0 || ra.channel >= k) fail_validation("channel not present in cloud");
        std::vector<double> points(static_cast<size_t>(3 * n));
        std::vector<double> aff(static_cast<size_t>(k * n));
        check(ooaf_cloud_points(cloud.get(), points.data()));
        check(ooaf_cloud_affordance(cloud.get(), aff.data()));

        // colorized cloud: features replaced by RGB in [0,1]
        std::vector<double> colors(static_cast<size_t>(3 * n));
        for (int64_t i = 0; i < n; ++i) {
            unsigned char rgb[3];
            heat_color(aff[static_cast<size_t>(k * i + ra.channel)], rgb);
            for (int c = 0; c < 3; ++c)
                colors[static_cast<size_t>(3 * i + c)] = rgb[c] / 255.0;
        }
        ooaf_cloud* colored = nullptr;
        check(ooaf_cloud_create(n, 3, k, points.data(), colors.data(), aff.data(), nullptr,
                                &colored));
        CloudPtr colored_ptr(colored, &ooaf_cloud_free);
        check(ooaf_cloud_save(colored, out_path(ra.out, "colorized.pc").c_str()));

        // top-down orthographic heatmap (max affordance per pixel), binary PPM
        const int res = ra.resolution;
        double min_x = points[0], max_x = points[0], min_y = points[1], max_y = points[1];
        for (int64_t i = 0; i < n; ++i) {
            min_x = std::min(min_x, points[static_cast<size_t>(3 * i)]);
            max_x = std::max(max_x, points[static_cast<size_t>(3 * i)]);
            min_y = std::min(min_y, points[static_cast<size_t>(3 * i + 1)]);
            max_y = std::max(max_y, points[static_cast<size_t>(3 * i + 1)]);
        }
        const double span = std::max({max_x - min_x, max_y - min_y, 1e-9});
        const double margin = 0.05 * span;
        const double scale = (res - 1) / (span + 2 * margin);
        std::vector<double> grid(static_cast<size_t>(res * res), -1.0);
        for (int64_t i = 0; i < n; ++i) {
            int px = static_cast<int>((points[static_cast<size_t>(3 * i)] - min_x + margin) * scale);
            int py = static_cast<int>((points[static_cast<size_t>(3 * i + 1)] - min_y + margin) * scale);
            px = std::clamp(px, 0, res - 1);
            py = std::clamp(py, 0, res - 1);
            size_t cell = static_cast<size_t>((res - 1 - py) * res + px);  // +y up
            grid[cell] = std::max(grid[cell], aff[static_cast<size_t>(k * i + ra.channel)]);
        }
        std::string ppm = "P6\n" + std::to_string(res) + " " + std::to_string(res) + "\n255\n";
        ppm.reserve(ppm.size() + static_cast<size_t>(3 * res * res));
        for (double v : grid) {
            unsigned char rgb[3] = {0, 0, 0};
            if (v >= 0.0) heat_color(v, rgb);
            ppm.push_back(static_cast<char>(rgb[0]));
            ppm.push_back(static_cast<char>(rgb[1]));
            ppm.push_back(static_cast<char>(rgb[2]));
        }
        write_text(out_path(ra.out, "heatmap.ppm"), ppm);
    });

    // ---- dump-embeddings ----
    auto* dump = app.add_subcommand("dump-embeddings", "Export tokenizer embeddings with part labels");
    struct {
        std::string model;
        std::string data;
        std::string out;
    } da;
    dump->add_option("--model", da.model, "Checkpoint path")->required();
    dump->add_option("--data", da.data, "Dataset root directory")->required();
    dump->add_option("--out", da.out, "Output directory")->required();
    dump->callback([&] {
        g.finish();
        ModelPtr model = load_model(da.model);
        check(ooaf_dump_embeddings(model.get(), da.data.c_str(),
                                   out_path(da.out, "embeddings.txt").c_str()));
    });

    // ---- grad-check ----
    auto* gc = app.add_subcommand("grad-check", "Verify analytic gradients by finite differences");
    struct {
        std::string model_config;
        std::string out;
    } ca;
    gc->add_option("--model-config", ca.model_config, "Model configuration JSON file");
    gc->add_option("--out", ca.out, "Optional output directory for report.json");
    gc->callback([&] {
        g.finish();
        std::string cfg_text;
        if (!ca.model_config.empty()) {
            std::ifstream f(ca.model_config);
            if (!f) fail_validation("cannot open model config " + ca.model_config);
            std::stringstream ss;
            ss << f.rdbuf();
            cfg_text = ss.str();
        } else if (g.cfg.contains("model")) {
            cfg_text = g.cfg.at("model").dump();
        }
        double max_rel = 0.0;
        char* report = nullptr;
        check(ooaf_grad_check(cfg_text.empty() ? nullptr : cfg_text.c_str(), &max_rel, &report));
        std::string report_text = take_string(report);
        std::cout << "max relative error " << format_double(max_rel) << "\n";
        if (!ca.out.empty()) write_text(out_path(ca.out, "report.json"), report_text);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CliError& e) {
        std::cerr << "error: " << e.message << "\n";
        return e.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
