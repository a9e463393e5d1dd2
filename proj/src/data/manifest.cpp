#include "data/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "core/cloud_io.hpp"

namespace fs = std::filesystem;

namespace ooaf {

namespace {

nlohmann::json read_meta(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return nlohmann::json::parse(in);
}

SamplePaths sample_in(const fs::path& dir) {
    SamplePaths p;
    p.src = (dir / "src.pc").string();
    p.tgt = (dir / "tgt.pc").string();
    p.meta = (dir / "meta.json").string();
    for (const auto& f : {p.src, p.tgt, p.meta})
        if (!fs::exists(f)) throw std::invalid_argument("missing dataset file: " + f);
    return p;
}

std::string canon(const std::string& p) { return fs::weakly_canonical(p).string(); }

}  // namespace

DatasetManifest build_manifest(const std::string& root_dir) {
    if (!fs::is_directory(root_dir)) throw std::invalid_argument("not a directory: " + root_dir);
    DatasetManifest manifest;
    for (const auto& entry : fs::directory_iterator(root_dir)) {
        if (!entry.is_directory()) continue;
        const std::string cat_name = entry.path().filename().string();
        CategorySamples cs;
        fs::path train_dir = entry.path() / "train";
        if (!fs::is_directory(train_dir))
            throw std::invalid_argument("category " + cat_name + " has no training sample");
        int train_count = 0;
        if (fs::exists(train_dir / "src.pc")) {
            cs.train = sample_in(train_dir);
            ++train_count;
        }
        for (const auto& sub : fs::directory_iterator(train_dir))
            if (sub.is_directory()) {
                cs.train = sample_in(sub.path());
                ++train_count;
            }
        if (train_count != 1)
            throw std::invalid_argument("category " + cat_name + " must have exactly one training sample, found " +
                                        std::to_string(train_count));
        auto meta = read_meta(cs.train.meta);
        cs.category.id = meta.at("category_id").get<int>();
        cs.category.name = meta.at("category_name").get<std::string>();
        if (cs.category.name != cat_name)
            throw std::invalid_argument("category directory " + cat_name + " does not match meta name " +
                                        cs.category.name);
        fs::path eval_dir = entry.path() / "eval";
        if (fs::is_directory(eval_dir)) {
            std::vector<fs::path> ids;
            for (const auto& sub : fs::directory_iterator(eval_dir))
                if (sub.is_directory()) ids.push_back(sub.path());
            std::sort(ids.begin(), ids.end());
            for (const auto& id : ids) cs.eval.push_back(sample_in(id));
        }
        manifest.categories.push_back(std::move(cs));
    }
    if (manifest.categories.empty()) throw std::invalid_argument("no categories under " + root_dir);
    std::sort(manifest.categories.begin(), manifest.categories.end(),
              [](const CategorySamples& a, const CategorySamples& b) {
                  return a.category.id < b.category.id;
              });
    std::set<int> ids;
    std::set<std::string> train_files, eval_files;
    for (const auto& cs : manifest.categories) {
        if (!ids.insert(cs.category.id).second)
            throw std::invalid_argument("duplicate category id for " + cs.category.name);
        train_files.insert(canon(cs.train.src));
        train_files.insert(canon(cs.train.tgt));
        for (const auto& ev : cs.eval) {
            eval_files.insert(canon(ev.src));
            eval_files.insert(canon(ev.tgt));
        }
    }
    for (int k = 0; k < manifest.num_categories(); ++k)
        if (!ids.count(k)) throw std::invalid_argument("category ids must be contiguous from 0");
    for (const auto& f : eval_files)
        if (train_files.count(f))
            throw std::invalid_argument("train/eval overlap: " + f);
    return manifest;
}

ObjectPair load_sample(const SamplePaths& paths) {
    ObjectPair pair;
    pair.source = load_cloud(paths.src);
    pair.target = load_cloud(paths.tgt);
    auto meta = read_meta(paths.meta);
    pair.category.id = meta.at("category_id").get<int>();
    pair.category.name = meta.at("category_name").get<std::string>();
    return pair;
}

namespace {

void write_sample(const fs::path& dir, const ObjectPair& pair, uint64_t instance_seed) {
    fs::create_directories(dir);
    save_cloud(pair.source, (dir / "src.pc").string());
    save_cloud(pair.target, (dir / "tgt.pc").string());
    nlohmann::json meta = {{"category_id", pair.category.id},
                           {"category_name", pair.category.name},
                           {"instance_seed", instance_seed}};
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2) << "\n";
}

}  // namespace

void write_dataset(const std::string& root_dir, const DatasetGenOptions& opt) {
    for (size_t cat = 0; cat < kCategoryNames.size(); ++cat) {
        const std::string& name = kCategoryNames[cat];
        uint64_t train_seed = opt.base_seed + 1000 * cat;
        ObjectPair train = synth_features(
            generate_pair(name, train_seed, opt.perturbation, opt.synth), opt.feature_dim,
            opt.feature_seed, opt.feature_noise, opt.feature_mode);
        write_sample(fs::path(root_dir) / name / "train", train, train_seed);
        for (int e = 0; e < opt.n_eval; ++e) {
            uint64_t seed = opt.base_seed + 1000 * cat + 1 + static_cast<uint64_t>(e);
            ObjectPair ev = synth_features(
                generate_pair(name, seed, opt.perturbation, opt.synth), opt.feature_dim,
                opt.feature_seed, opt.feature_noise, opt.feature_mode);
            write_sample(fs::path(root_dir) / name / "eval" / std::to_string(e), ev, seed);
        }
    }
}

}  // namespace ooaf
