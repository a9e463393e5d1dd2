#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/types.hpp"

namespace ooaf {

enum class TermType {
    affordance_alignment,
    position_above,
    orientation_tilt,
    clearance,
    contact_quality,
    stability,
    perpendicular,
    containment,
    collision,
};

TermType term_type_from_string(const std::string& s);
std::string term_type_to_string(TermType t);

struct ConstraintTerm {
    TermType type;
    double weight = 0.0;
    std::map<std::string, double> params;

    double param(const std::string& key) const;
    double param_or(const std::string& key, double fallback) const;
};

struct ConstraintSpec {
    std::string task;
    std::vector<ConstraintTerm> terms;

    void validate() const;
};

/// JSON: {"task": str, "terms": [{"type": str, "weight": float, "params": {..}}]}
ConstraintSpec load_spec(const std::string& path);
ConstraintSpec parse_spec(const std::string& json_text);

/// Built-in specs for pour|hang|cut|press|insert with the published weights.
ConstraintSpec builtin_spec(const std::string& task);

std::string spec_to_json(const ConstraintSpec& spec);

}  // namespace ooaf
