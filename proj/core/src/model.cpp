#include "decenergy/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "decenergy/errors.hpp"

namespace decenergy {

EnergyConstants builtin_constants() {
    EnergyConstants k;
    k.e0 = 1.579e-2;
    k.e_slice = 6.250e-4;
    // Per-TU prediction energies, [class][depth - 1].
    k.e_mode_depth = {{
        {2.505e-4, 6.262e-5, 2.150e-5, 7.214e-6},  // pla
        {2.452e-4, 6.209e-5, 2.161e-5, 7.332e-6},  // dc
        {2.512e-4, 6.336e-5, 2.199e-5, 7.429e-6},  // hvd
        {2.556e-4, 6.442e-5, 2.215e-5, 7.443e-6},  // ang
    }};
    k.e_depth_avg = {2.550e-4, 6.262e-5, 2.150e-5, 7.431e-6};
    k.e_cbf = 9.863e-7;
    k.e_coeff = 2.064e-7;
    k.e_val = 1.729e-7;
    k.e_nompm = 7.413e-7;
    k.e_tsf = 5.0916e-7;
    return k;
}

std::string_view model_kind_name(ModelKind kind) {
    return kind == ModelKind::accurate ? "accurate" : "simplified";
}

std::array<std::pair<std::string_view, double>, 8> named_terms(const EstimateTerms& t) {
    return {{{"offset", t.offset},
             {"slice", t.slice},
             {"mode_depth", t.mode_depth},
             {"cbf", t.cbf},
             {"coeff", t.coeff},
             {"val", t.val},
             {"nompm", t.nompm},
             {"tsf", t.tsf}}};
}

namespace {

// Single accumulation routine shared by both models: the simplified model is
// the accurate sum over a reduced constants set, so the two agree bitwise
// whenever their effective constants and features coincide.
EstimateReport evaluate(const FeatureCounts& f, const EnergyConstants& k, ModelKind kind) {
    EstimateReport report;
    report.model_kind = kind;
    EstimateTerms& t = report.terms;
    t.offset = k.e0;
    t.slice = k.e_slice * static_cast<double>(f.n_slice);
    double mode_depth = 0.0;
    for (int c = 0; c < 4; ++c) {
        for (int d = 0; d < 4; ++d) {
            mode_depth += k.e_mode_depth[c][d] * static_cast<double>(f.n_mode_depth[c][d]);
        }
    }
    t.mode_depth = mode_depth;
    t.cbf = k.e_cbf * static_cast<double>(f.n_cbf);
    t.coeff = k.e_coeff * static_cast<double>(f.n_coeff);
    t.val = k.e_val * f.sum_log2_abs;
    t.nompm = k.e_nompm * static_cast<double>(f.n_nompm);
    t.tsf = f.n_tsf == 0 ? 0.0 : -(k.e_tsf * static_cast<double>(f.n_tsf));
    report.total = t.offset + t.slice + t.mode_depth + t.cbf + t.coeff + t.val + t.nompm + t.tsf;
    return report;
}

}  // namespace

EstimateReport estimate_accurate(const FeatureCounts& f, const EnergyConstants& k) {
    return evaluate(f, k, ModelKind::accurate);
}

EstimateReport estimate_simplified(const FeatureCounts& f, const EnergyConstants& k) {
    EnergyConstants reduced = k;
    for (int c = 0; c < 4; ++c) {
        for (int d = 0; d < 4; ++d) reduced.e_mode_depth[c][d] = k.e_depth_avg[d];
    }
    reduced.e_val = 0.0;
    reduced.e_nompm = 0.0;
    reduced.e_tsf = 0.0;
    EstimateReport report = evaluate(f, reduced, ModelKind::simplified);
    if (f.qp <= 30) {
        report.warnings.push_back("simplified model invalid for QP <= 30 (trace has QP " +
                                  std::to_string(f.qp) + ")");
    }
    if (f.n_tsf > 0) {
        report.warnings.push_back("simplified model ignores the transform skip term (n_tsf = " +
                                  std::to_string(f.n_tsf) + ")");
    }
    if (f.n_nompm > 0) {
        report.warnings.push_back("simplified model ignores the non-MPM term (n_nompm = " +
                                  std::to_string(f.n_nompm) + ")");
    }
    return report;
}

double relative_error(double measured_joules, double estimated_joules) {
    if (!(measured_joules > 0.0)) {
        throw std::domain_error("relative error requires a positive measured energy");
    }
    return std::abs(measured_joules - estimated_joules) / measured_joules;
}

std::array<double, 4> mode_spread(const EnergyConstants& k) {
    std::array<double, 4> spread{};
    for (int d = 0; d < 4; ++d) {
        if (k.e_depth_avg[d] == 0.0) {
            throw std::domain_error("mode spread undefined: zero average at depth " +
                                    std::to_string(d + 1));
        }
        double worst = 0.0;
        for (int c = 0; c < 4; ++c) {
            worst = std::max(worst, std::abs(k.e_mode_depth[c][d] - k.e_depth_avg[d]) /
                                        std::abs(k.e_depth_avg[d]));
        }
        spread[d] = worst;
    }
    return spread;
}

namespace {

std::string shortest_repr(double value) {
    std::array<char, 64> buffer{};
    auto result = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
    return std::string(buffer.data(), result.ptr);
}

// Canonical profile keys in file order.
std::vector<std::string> profile_keys() {
    std::vector<std::string> keys = {"e0", "e_slice"};
    for (auto class_name : mode_class_names) {
        for (int d = 1; d <= 4; ++d) {
            keys.push_back("e_mode_depth." + std::string(class_name) + "." + std::to_string(d));
        }
    }
    for (int d = 1; d <= 4; ++d) keys.push_back("e_depth_avg." + std::to_string(d));
    keys.insert(keys.end(), {"e_cbf", "e_coeff", "e_val", "e_nompm", "e_tsf"});
    return keys;
}

// Maps every canonical key to its storage slot.
std::map<std::string, double*> profile_slots(EnergyConstants& k) {
    std::map<std::string, double*> slots;
    slots["e0"] = &k.e0;
    slots["e_slice"] = &k.e_slice;
    for (int c = 0; c < 4; ++c) {
        for (int d = 0; d < 4; ++d) {
            slots["e_mode_depth." + std::string(mode_class_names[c]) + "." + std::to_string(d + 1)] =
                &k.e_mode_depth[c][d];
        }
    }
    for (int d = 0; d < 4; ++d) slots["e_depth_avg." + std::to_string(d + 1)] = &k.e_depth_avg[d];
    slots["e_cbf"] = &k.e_cbf;
    slots["e_coeff"] = &k.e_coeff;
    slots["e_val"] = &k.e_val;
    slots["e_nompm"] = &k.e_nompm;
    slots["e_tsf"] = &k.e_tsf;
    return slots;
}

std::string_view trim(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t' || text.front() == '\r')) {
        text.remove_prefix(1);
    }
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
        text.remove_suffix(1);
    }
    return text;
}

}  // namespace

std::string profile_to_string(const EnergyConstants& k) {
    std::string out = "# decenergy constants profile (joules)\n";
    for (const auto& [key, value] : profile_entries(k)) {
        out += key;
        out += " = ";
        out += shortest_repr(value);
        out += '\n';
    }
    return out;
}

std::vector<std::pair<std::string, double>> profile_entries(const EnergyConstants& k) {
    EnergyConstants copy = k;
    auto slots = profile_slots(copy);
    std::vector<std::pair<std::string, double>> entries;
    for (const std::string& key : profile_keys()) {
        entries.emplace_back(key, *slots.at(key));
    }
    return entries;
}

EnergyConstants parse_profile(std::string_view text, std::string_view source_name) {
    EnergyConstants k;
    auto slots = profile_slots(k);
    std::map<std::string, bool> seen;
    std::size_t line_number = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_number;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        std::string where = std::string(source_name) + ":" + std::to_string(line_number) + ": ";
        std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ValidationError(where + "expected 'key = value'");
        }
        std::string key(trim(line.substr(0, eq)));
        std::string_view value_text = trim(line.substr(eq + 1));
        auto slot = slots.find(key);
        if (slot == slots.end()) {
            throw ValidationError(where + "unknown constant '" + key + "'");
        }
        if (seen[key]) {
            throw ValidationError(where + "duplicate constant '" + key + "'");
        }
        double value = 0.0;
        auto result = std::from_chars(value_text.data(), value_text.data() + value_text.size(), value);
        if (result.ec != std::errc() || result.ptr != value_text.data() + value_text.size() ||
            !std::isfinite(value)) {
            throw ValidationError(where + "cannot parse value '" + std::string(value_text) + "'");
        }
        *slot->second = value;
        seen[key] = true;
    }
    for (const std::string& key : profile_keys()) {
        if (!seen[key]) {
            throw ValidationError(std::string(source_name) + ": missing constant '" + key + "'");
        }
    }
    return k;
}

EnergyConstants load_profile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open constants profile: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_profile(buffer.str(), path.string());
}

void save_profile(const std::filesystem::path& path, const EnergyConstants& k) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write constants profile: " + path.string());
    out << profile_to_string(k);
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace decenergy
