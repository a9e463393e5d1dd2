#include "planner/spec.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace ooaf {

namespace {

const std::map<std::string, TermType> kTypeNames = {
    {"affordance_alignment", TermType::affordance_alignment},
    {"position_above", TermType::position_above},
    {"orientation_tilt", TermType::orientation_tilt},
    {"clearance", TermType::clearance},
    {"contact_quality", TermType::contact_quality},
    {"stability", TermType::stability},
    {"perpendicular", TermType::perpendicular},
    {"containment", TermType::containment},
    {"collision", TermType::collision},
};

// term types with parameters that have no sensible default
void check_required(const ConstraintTerm& term) {
    auto require = [&term](const char* key) {
        if (!term.params.count(key))
            throw std::invalid_argument("term " + term_type_to_string(term.type) +
                                        " missing param " + key);
    };
    switch (term.type) {
        case TermType::orientation_tilt:
            require("theta_min");
            require("theta_max");
            break;
        case TermType::clearance:
            require("dmin");
            break;
        default:
            break;
    }
}

}  // namespace

TermType term_type_from_string(const std::string& s) {
    auto it = kTypeNames.find(s);
    if (it == kTypeNames.end()) throw std::invalid_argument("unknown term type: " + s);
    return it->second;
}

std::string term_type_to_string(TermType t) {
    for (const auto& [name, type] : kTypeNames)
        if (type == t) return name;
    return "?";
}

double ConstraintTerm::param(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end())
        throw std::invalid_argument("term " + term_type_to_string(type) + " missing param " + key);
    return it->second;
}

double ConstraintTerm::param_or(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

void ConstraintSpec::validate() const {
    if (terms.empty()) throw std::invalid_argument("spec needs at least one term");
    for (const auto& term : terms) {
        if (!(term.weight >= 0.0) || !std::isfinite(term.weight))
            throw std::invalid_argument("negative or non-finite weight");
        check_required(term);
    }
}

ConstraintSpec parse_spec(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    ConstraintSpec spec;
    spec.task = j.at("task").get<std::string>();
    for (const auto& jt : j.at("terms")) {
        ConstraintTerm term;
        term.type = term_type_from_string(jt.at("type").get<std::string>());
        term.weight = jt.at("weight").get<double>();
        if (jt.contains("params"))
            for (const auto& [key, value] : jt.at("params").items())
                term.params[key] = value.get<double>();
        spec.terms.push_back(std::move(term));
    }
    spec.validate();
    return spec;
}

ConstraintSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_spec(text);
}

std::string spec_to_json(const ConstraintSpec& spec) {
    nlohmann::json j = {{"task", spec.task}, {"terms", nlohmann::json::array()}};
    for (const auto& term : spec.terms) {
        nlohmann::json jt = {{"type", term_type_to_string(term.type)}, {"weight", term.weight}};
        if (!term.params.empty()) {
            jt["params"] = nlohmann::json::object();
            for (const auto& [key, value] : term.params) jt["params"][key] = value;
        }
        j["terms"].push_back(jt);
    }
    return j.dump(2);
}

ConstraintSpec builtin_spec(const std::string& task) {
    ConstraintSpec spec;
    spec.task = task;
    auto term = [](TermType type, double weight,
                   std::map<std::string, double> params = {}) -> ConstraintTerm {
        return {type, weight, std::move(params)};
    };
    if (task == "pour") {
        spec.terms = {term(TermType::affordance_alignment, 0.3),
                      term(TermType::position_above, 0.2, {{"delta", 0.05}}),
                      term(TermType::orientation_tilt, 0.3, {{"theta_min", 30.0}, {"theta_max", 60.0}}),
                      term(TermType::clearance, 0.1, {{"dmin", 0.05}})};
    } else if (task == "hang") {
        spec.terms = {term(TermType::affordance_alignment, 0.3),
                      term(TermType::contact_quality, 0.3),
                      term(TermType::stability, 0.3),
                      term(TermType::collision, 0.1, {{"r_pen", 0.005}})};
    } else if (task == "cut") {
        spec.terms = {term(TermType::affordance_alignment, 0.4),
                      term(TermType::perpendicular, 0.4),
                      term(TermType::collision, 0.2, {{"r_pen", 0.005}})};
    } else if (task == "press") {
        spec.terms = {term(TermType::affordance_alignment, 0.4),
                      term(TermType::contact_quality, 0.3),
                      term(TermType::perpendicular, 0.2, {}),
                      term(TermType::collision, 0.1, {{"r_pen", 0.005}})};
    } else if (task == "insert") {
        spec.terms = {term(TermType::affordance_alignment, 0.3),
                      term(TermType::containment, 0.4, {{"inflate", 0.02}}),
                      term(TermType::orientation_tilt, 0.2, {{"theta_min", 0.0}, {"theta_max", 15.0}}),
                      term(TermType::collision, 0.1, {{"r_pen", 0.005}})};
    } else {
        throw std::invalid_argument("no built-in spec for task: " + task);
    }
    spec.validate();
    return spec;
}

}  // namespace ooaf
