#pragma once

#include <nlohmann/json.hpp>

#include "decenergy/model.hpp"
#include "decenergy/trace.hpp"

// JSON bindings for the value types that cross file and tool boundaries.
// Templated on the json type so both nlohmann::json and nlohmann::ordered_json
// (stable field order for file output) work.

namespace decenergy {

template <typename BasicJsonType>
void to_json(BasicJsonType& j, const FeatureCounts& f) {
    j = BasicJsonType::object();
    j["n_slice"] = f.n_slice;
    j["qp"] = f.qp;
    j["n_mode_depth"] = f.n_mode_depth;
    j["n_cbf"] = f.n_cbf;
    j["n_coeff"] = f.n_coeff;
    j["sum_log2_abs"] = f.sum_log2_abs;
    j["n_nompm"] = f.n_nompm;
    j["n_tsf"] = f.n_tsf;
}

template <typename BasicJsonType>
void from_json(const BasicJsonType& j, FeatureCounts& f) {
    j.at("n_slice").get_to(f.n_slice);
    j.at("qp").get_to(f.qp);
    j.at("n_mode_depth").get_to(f.n_mode_depth);
    j.at("n_cbf").get_to(f.n_cbf);
    j.at("n_coeff").get_to(f.n_coeff);
    j.at("sum_log2_abs").get_to(f.sum_log2_abs);
    j.at("n_nompm").get_to(f.n_nompm);
    j.at("n_tsf").get_to(f.n_tsf);
}

template <typename BasicJsonType>
void to_json(BasicJsonType& j, const EstimateReport& report) {
    j = BasicJsonType::object();
    j["model"] = std::string(model_kind_name(report.model_kind));
    j["total"] = report.total;
    auto terms = BasicJsonType::object();
    for (const auto& [name, value] : named_terms(report.terms)) {
        terms[std::string(name)] = value;
    }
    j["terms"] = std::move(terms);
    j["warnings"] = report.warnings;
}

}  // namespace decenergy
