#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "decenergy/model.hpp"
#include "decenergy/trace.hpp"

namespace decenergy {

// One calibration observation: feature counts plus the measured decoding
// energy of the stream they describe.
struct MeasurementPair {
    FeatureCounts features;
    double energy = 0.0;  // joules
};

// The full model is linear in its constants. One design-vector component per
// additive term: the offset, n_slice, the 16 mode/depth counts, n_cbf,
// n_coeff, sum_log2_abs, n_nompm, and n_tsf (carried with a negative sign so
// the fitted constant stays nonnegative).
inline constexpr std::size_t design_dimension = 23;

using DesignVector = std::array<double, design_dimension>;

DesignVector design_vector(const FeatureCounts& f);

// Constant names in design order: e0, e_slice, e_mode_depth.<class>.<depth>
// (class-major), e_cbf, e_coeff, e_val, e_nompm, e_tsf.
const std::array<std::string, design_dimension>& constant_names();

DesignVector constants_as_vector(const EnergyConstants& k);

// Inverse of constants_as_vector. The fit cannot identify the per-depth
// averages (they are not a term of the full model), so e_depth_avg is filled
// with the arithmetic mean of the four class energies at each depth.
EnergyConstants constants_from_vector(const DesignVector& v);

struct FitResult {
    EnergyConstants constants;
    double residual_rms = 0.0;                 // sqrt(mean squared residual), joules
    std::vector<std::string> negative_flags;   // constants fitted below zero
    std::optional<std::string> condition_warning;
};

// Ordinary least squares over the design vectors, solved by column-pivoted
// Householder QR (feature magnitudes span several orders; normal equations
// would square the condition number). Throws CalibrationError naming the
// unidentifiable constants when the design matrix is rank deficient or the
// dataset is smaller than the design dimension.
FitResult fit_constants(std::span<const MeasurementPair> dataset);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
};

// Least-squares line through (xs, ys); the building block of the marginal
// single-feature fits. Throws std::domain_error for fewer than two points or
// coincident abscissas.
LineFit fit_energy_line(std::span<const double> xs, std::span<const double> ys);

struct CoeffPoint {
    std::int64_t n_coeff = 0;
    double energy = 0.0;
};

// Least-squares line of energy against coefficient count; the slope estimates
// the per-coefficient energy. Throws std::domain_error when all abscissas
// coincide or fewer than two points are given.
LineFit fit_coeff_energy(std::span<const CoeffPoint> points);

struct ValuePoint {
    std::int64_t value = 0;  // signed; folded to |value| >= 1
    double energy = 0.0;
};

// Least-squares line of energy against log2|value|; the slope estimates the
// per-log2-unit energy. By default only points with |value| < 256 enter the
// fit (the small values dominate real streams); include_all lifts the filter.
LineFit fit_value_energy(std::span<const ValuePoint> points, bool include_all = false);

// Synthetic stand-in for a measured device: energies are full-model outputs
// of a ground-truth profile with multiplicative Gaussian noise.
struct SimulatorConfig {
    EnergyConstants truth;
    double noise_rel = 0.0;
    std::uint64_t seed = 0;
};

// energy = estimate_accurate(features, truth) * (1 + eps), eps ~ N(0, noise_rel).
// Each row draws from its own generator seeded by (seed, row index), so the
// dataset is reproducible independently of evaluation order.
std::vector<MeasurementPair> simulate(const SimulatorConfig& config,
                                      std::span<const FeatureCounts> features);

// Dataset file: JSON lines; a {"kind": "dataset"} header object, then one row
// object per measurement: {"features": {...}, "energy": E} or
// {"trace": "path", "energy": E} with the path resolved against the dataset
// file's directory.
std::vector<MeasurementPair> read_dataset_file(const std::filesystem::path& path,
                                               const ParseOptions& options = {},
                                               std::vector<std::string>* warnings = nullptr);
void write_dataset_file(const std::filesystem::path& path,
                        std::span<const MeasurementPair> rows);

// Feature-counts file: JSON lines, one FeatureCounts object per line.
std::vector<FeatureCounts> read_features_file(const std::filesystem::path& path,
                                              const ParseOptions& options = {},
                                              std::vector<std::string>* warnings = nullptr);
void write_features_file(const std::filesystem::path& path,
                         std::span<const FeatureCounts> features);

// Simulator config file: one JSON object with keys truth_profile ("builtin"
// or a profile path, resolved against the config file's directory),
// noise_rel, and seed.
SimulatorConfig read_simulator_config(const std::filesystem::path& path,
                                      const ParseOptions& options = {},
                                      std::vector<std::string>* warnings = nullptr);

}  // namespace decenergy
