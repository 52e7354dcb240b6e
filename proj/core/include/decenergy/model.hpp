#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "decenergy/trace.hpp"

namespace decenergy {

// Per-feature energy costs in joules. The built-in profile holds the
// measured constants for the reference mobile decoder; calibrated profiles
// come out of the calibration module.
struct EnergyConstants {
    double e0 = 0.0;       // fixed startup/termination offset
    double e_slice = 0.0;  // per decoded slice
    // Per-TU prediction energy, indexed [mode class][depth - 1].
    std::array<std::array<double, 4>, 4> e_mode_depth = {};
    // Mean prediction energy per depth across all intra modes ("avg" row).
    std::array<double, 4> e_depth_avg = {};
    double e_cbf = 0.0;    // per set coded block flag
    double e_coeff = 0.0;  // per nonzero coefficient
    double e_val = 0.0;    // per log2 unit of coefficient magnitude
    double e_nompm = 0.0;  // per mode not coded as MPM
    double e_tsf = 0.0;    // saved per transform skip (subtracted)

    double& at(ModeClass mc, int depth) { return e_mode_depth[static_cast<int>(mc)][depth - 1]; }
    double at(ModeClass mc, int depth) const { return e_mode_depth[static_cast<int>(mc)][depth - 1]; }
};

// The measured constants profile shipped with the toolkit.
EnergyConstants builtin_constants();

enum class ModelKind { accurate, simplified };

std::string_view model_kind_name(ModelKind kind);

struct EstimateTerms {
    double offset = 0.0;
    double slice = 0.0;
    double mode_depth = 0.0;
    double cbf = 0.0;
    double coeff = 0.0;
    double val = 0.0;
    double nompm = 0.0;  // zero in the simplified model
    double tsf = 0.0;    // enters negatively in the accurate model
};

// Term name/value pairs in canonical order.
std::array<std::pair<std::string_view, double>, 8> named_terms(const EstimateTerms& terms);

struct EstimateReport {
    double total = 0.0;  // sum of the terms, in canonical order
    EstimateTerms terms;
    ModelKind model_kind = ModelKind::accurate;
    std::vector<std::string> warnings;  // advisory only, never change numbers
};

// Full model:
//   total = e0 + e_slice*n_slice + sum over (class, depth) of e_mode_depth*n
//         + e_cbf*n_cbf + e_coeff*n_coeff + e_val*sum_log2_abs
//         + e_nompm*n_nompm - e_tsf*n_tsf
EstimateReport estimate_accurate(const FeatureCounts& f, const EnergyConstants& k);

// Reduced model: mode classes collapse to the per-depth average and the
// value, MPM, and TSF terms are dropped. Valid for QP > 30; a warning is
// attached otherwise, and when dropped features are present in the input.
// Evaluated through the same accumulation as the accurate model so that the
// two agree bitwise whenever the dropped terms vanish and the class energies
// equal the averages.
EstimateReport estimate_simplified(const FeatureCounts& f, const EnergyConstants& k);

// |measured - estimated| / measured. Throws std::domain_error for
// measured <= 0.
double relative_error(double measured_joules, double estimated_joules);

// Per depth: max over mode classes of |e_mode_depth - e_depth_avg| / e_depth_avg.
// Throws std::domain_error if any depth average is zero.
std::array<double, 4> mode_spread(const EnergyConstants& k);

// Constants profile file: "key = value" lines, '#' comments. Canonical keys:
// e0, e_slice, e_mode_depth.<class>.<depth>, e_depth_avg.<depth>, e_cbf,
// e_coeff, e_val, e_nompm, e_tsf. Unknown, duplicate, or missing keys are
// errors. Values are written with shortest round-trip precision, so export
// followed by parse is exact.
std::string profile_to_string(const EnergyConstants& k);
// Canonical (key, value) pairs in file order.
std::vector<std::pair<std::string, double>> profile_entries(const EnergyConstants& k);
EnergyConstants parse_profile(std::string_view text, std::string_view source_name = "<string>");
EnergyConstants load_profile(const std::filesystem::path& path);
void save_profile(const std::filesystem::path& path, const EnergyConstants& k);

}  // namespace decenergy
