#pragma once

#include <string>
#include <vector>

#include "core/types.hpp"
#include "data/synth.hpp"

namespace ooaf {

struct SamplePaths {
    std::string src;
    std::string tgt;
    std::string meta;
};

struct CategorySamples {
    AffordanceCategory category;
    SamplePaths train;
    std::vector<SamplePaths> eval;
};

/// One-shot dataset index: exactly one training pair per category,
/// train and eval paths disjoint.
struct DatasetManifest {
    std::vector<CategorySamples> categories;
    int num_categories() const { return static_cast<int>(categories.size()); }
};

/// Scans <root>/<category>/train/{src.pc,tgt.pc,meta.json} and
/// <root>/<category>/eval/<id>/... and validates the one-shot invariants.
DatasetManifest build_manifest(const std::string& root_dir);

ObjectPair load_sample(const SamplePaths& paths);

struct DatasetGenOptions {
    int n_eval = 10;
    double perturbation = 0.3;
    uint64_t base_seed = 1;
    uint64_t feature_seed = 7;
    int feature_dim = 64;
    double feature_noise = 0.02;
    FeatureMode feature_mode = FeatureMode::parts;
    SynthOptions synth;
};

/// Writes a full synthetic dataset in the manifest layout.
void write_dataset(const std::string& root_dir, const DatasetGenOptions& opt);

}  // namespace ooaf
