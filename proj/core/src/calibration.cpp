#include "decenergy/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "decenergy/errors.hpp"
#include "decenergy/json.hpp"
#include "json_io.hpp"

namespace decenergy {

DesignVector design_vector(const FeatureCounts& f) {
    DesignVector v{};
    v[0] = 1.0;
    v[1] = static_cast<double>(f.n_slice);
    std::size_t i = 2;
    for (const auto& row : f.n_mode_depth) {
        for (std::int64_t n : row) v[i++] = static_cast<double>(n);
    }
    v[18] = static_cast<double>(f.n_cbf);
    v[19] = static_cast<double>(f.n_coeff);
    v[20] = f.sum_log2_abs;
    v[21] = static_cast<double>(f.n_nompm);
    // The TSF term enters the model with a minus sign; keeping the sign here
    // lets the fitted e_tsf come out positive. Zero stays +0.0.
    v[22] = f.n_tsf == 0 ? 0.0 : -static_cast<double>(f.n_tsf);
    return v;
}

const std::array<std::string, design_dimension>& constant_names() {
    static const std::array<std::string, design_dimension> names = [] {
        std::array<std::string, design_dimension> n;
        n[0] = "e0";
        n[1] = "e_slice";
        std::size_t i = 2;
        for (std::string_view cls : mode_class_names) {
            for (int d = min_depth; d <= max_depth; ++d) {
                n[i++] = "e_mode_depth." + std::string(cls) + "." + std::to_string(d);
            }
        }
        n[18] = "e_cbf";
        n[19] = "e_coeff";
        n[20] = "e_val";
        n[21] = "e_nompm";
        n[22] = "e_tsf";
        return n;
    }();
    return names;
}

DesignVector constants_as_vector(const EnergyConstants& k) {
    DesignVector v{};
    v[0] = k.e0;
    v[1] = k.e_slice;
    std::size_t i = 2;
    for (const auto& row : k.e_mode_depth) {
        for (double e : row) v[i++] = e;
    }
    v[18] = k.e_cbf;
    v[19] = k.e_coeff;
    v[20] = k.e_val;
    v[21] = k.e_nompm;
    v[22] = k.e_tsf;
    return v;
}

EnergyConstants constants_from_vector(const DesignVector& v) {
    EnergyConstants k;
    k.e0 = v[0];
    k.e_slice = v[1];
    std::size_t i = 2;
    for (auto& row : k.e_mode_depth) {
        for (double& e : row) e = v[i++];
    }
    k.e_cbf = v[18];
    k.e_coeff = v[19];
    k.e_val = v[20];
    k.e_nompm = v[21];
    k.e_tsf = v[22];
    for (int d = 0; d < 4; ++d) {
        double sum = 0.0;
        for (const auto& row : k.e_mode_depth) sum += row[d];
        k.e_depth_avg[d] = sum / 4.0;
    }
    return k;
}

namespace {

std::string join_names(const std::vector<std::string>& names) {
    std::string joined;
    for (const std::string& name : names) {
        if (!joined.empty()) joined += ", ";
        joined += name;
    }
    return joined;
}

}  // namespace

FitResult fit_constants(std::span<const MeasurementPair> dataset) {
    const auto& names = constant_names();
    constexpr auto p = static_cast<Eigen::Index>(design_dimension);
    const auto n = static_cast<Eigen::Index>(dataset.size());
    if (n < p) {
        throw CalibrationError(
            "dataset has " + std::to_string(dataset.size()) + " rows; at least " +
                std::to_string(design_dimension) + " are needed to identify every constant",
            {names.begin(), names.end()});
    }

    Eigen::MatrixXd a(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const DesignVector dv = design_vector(dataset[i].features);
        for (Eigen::Index j = 0; j < p; ++j) a(i, j) = dv[j];
        y(i) = dataset[i].energy;
    }

    // A feature that never occurs gives an all-zero column; no amount of
    // pivoting can recover its constant, so report it by name up front.
    std::vector<std::string> dead;
    Eigen::VectorXd scale(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double norm = a.col(j).norm();
        if (norm == 0.0) {
            dead.push_back(names[j]);
            scale(j) = 1.0;
        } else {
            scale(j) = norm;
        }
    }
    if (!dead.empty()) {
        throw CalibrationError("dataset never exercises: " + join_names(dead), dead);
    }

    // Counts span several orders of magnitude; equilibrating the columns makes
    // the pivot magnitudes comparable so the rank threshold is meaningful.
    Eigen::MatrixXd scaled = a * scale.cwiseInverse().asDiagonal();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
    qr.setThreshold(1e-10);

    const Eigen::Index rank = qr.rank();
    const auto& pivot = qr.colsPermutation().indices();
    if (rank < p) {
        std::vector<Eigen::Index> missing(pivot.data() + rank, pivot.data() + p);
        std::sort(missing.begin(), missing.end());
        std::vector<std::string> weak;
        weak.reserve(missing.size());
        for (Eigen::Index j : missing) weak.push_back(names[j]);
        throw CalibrationError("design matrix has rank " + std::to_string(rank) + " of " +
                                   std::to_string(design_dimension) +
                                   "; the dataset does not separate: " + join_names(weak),
                               weak);
    }

    const Eigen::VectorXd x = qr.solve(y).cwiseQuotient(scale);

    FitResult result;
    DesignVector xv{};
    for (Eigen::Index j = 0; j < p; ++j) xv[j] = x(j);
    result.constants = constants_from_vector(xv);
    result.residual_rms = std::sqrt((y - a * x).squaredNorm() / static_cast<double>(n));
    for (Eigen::Index j = 0; j < p; ++j) {
        if (x(j) < 0.0) result.negative_flags.push_back(names[j]);
    }

    const double pivot_max = std::abs(qr.matrixQR()(0, 0));
    const double pivot_min = std::abs(qr.matrixQR()(p - 1, p - 1));
    if (pivot_min < 1e-8 * pivot_max) {
        std::ostringstream msg;
        msg << "ill-conditioned fit (pivot ratio " << std::scientific << pivot_max / pivot_min
            << "); '" << names[pivot(p - 1)] << "' is weakly identified";
        result.condition_warning = msg.str();
    }
    return result;
}

namespace {

LineFit fit_line(std::span<const double> xs, std::span<const double> ys, std::string_view what) {
    const std::size_t n = xs.size();
    if (n < 2) {
        throw std::domain_error(std::string(what) + ": at least two points are required, got " +
                                std::to_string(n));
    }
    double mean_x = 0.0;
    double mean_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_x += xs[i];
        mean_y += ys[i];
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);

    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mean_x;
        sxx += dx * dx;
        sxy += dx * (ys[i] - mean_y);
    }
    if (sxx == 0.0) {
        throw std::domain_error(std::string(what) + ": all abscissas coincide, slope undefined");
    }

    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = mean_y - fit.slope * mean_x;
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
        ssr += r * r;
    }
    fit.residual_rms = std::sqrt(ssr / static_cast<double>(n));
    return fit;
}

}  // namespace

LineFit fit_energy_line(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) {
        throw std::invalid_argument("fit_energy_line: xs and ys differ in length");
    }
    return fit_line(xs, ys, "line fit");
}

LineFit fit_coeff_energy(std::span<const CoeffPoint> points) {
    std::vector<double> xs;
    std::vector<double> ys;
    xs.reserve(points.size());
    ys.reserve(points.size());
    for (const CoeffPoint& point : points) {
        if (point.n_coeff < 0) {
            throw ValidationError("negative coefficient count in coefficient fit");
        }
        xs.push_back(static_cast<double>(point.n_coeff));
        ys.push_back(point.energy);
    }
    return fit_line(xs, ys, "coefficient fit");
}

LineFit fit_value_energy(std::span<const ValuePoint> points, bool include_all) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (const ValuePoint& point : points) {
        if (point.value == 0) {
            throw ValidationError("coefficient value 0 in value fit (coefficients are nonzero)");
        }
        const std::int64_t magnitude = point.value < 0 ? -point.value : point.value;
        if (!include_all && magnitude >= 256) continue;
        xs.push_back(std::log2(static_cast<double>(magnitude)));
        ys.push_back(point.energy);
    }
    if (xs.size() < 2 && !include_all && points.size() >= 2) {
        throw std::domain_error("value fit: fewer than two points with |value| < 256 (the "
                                "default range); include the full range to use them all");
    }
    return fit_line(xs, ys, "value fit");
}

std::vector<MeasurementPair> simulate(const SimulatorConfig& config,
                                      std::span<const FeatureCounts> features) {
    if (!std::isfinite(config.noise_rel) || config.noise_rel < 0.0) {
        throw ValidationError("noise_rel must be finite and nonnegative");
    }
    std::vector<MeasurementPair> rows;
    rows.reserve(features.size());
    for (std::size_t row = 0; row < features.size(); ++row) {
        double energy = estimate_accurate(features[row], config.truth).total;
        if (config.noise_rel > 0.0) {
            std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                              static_cast<std::uint32_t>(config.seed >> 32),
                              static_cast<std::uint32_t>(row),
                              static_cast<std::uint32_t>(static_cast<std::uint64_t>(row) >> 32)};
            std::mt19937_64 engine(seq);
            std::normal_distribution<double> noise(0.0, config.noise_rel);
            energy *= 1.0 + noise(engine);
        }
        rows.push_back({features[row], energy});
    }
    return rows;
}

namespace {

using detail::at_line;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

FeatureCounts counts_from_json(const json& object, std::string_view source, std::size_t line,
                               const ParseOptions& options, std::vector<std::string>* warnings) {
    if (!object.is_object()) {
        throw ValidationError(at_line(source, line) + "feature counts must be a JSON object");
    }
    detail::check_fields(
        object,
        {"n_slice", "qp", "n_mode_depth", "n_cbf", "n_coeff", "sum_log2_abs", "n_nompm", "n_tsf"},
        source, line, options, warnings);

    FeatureCounts f;
    f.n_slice = detail::get_int(object, "n_slice", source, line);
    f.qp = static_cast<int>(detail::get_int(object, "qp", source, line));
    const json& grid = object.at("n_mode_depth");
    if (!grid.is_array() || grid.size() != 4) {
        detail::bad_field_type(source, line, "n_mode_depth", "a 4x4 integer array");
    }
    for (std::size_t c = 0; c < 4; ++c) {
        const json& row = grid[c];
        if (!row.is_array() || row.size() != 4) {
            detail::bad_field_type(source, line, "n_mode_depth", "a 4x4 integer array");
        }
        for (std::size_t d = 0; d < 4; ++d) {
            if (!row[d].is_number_integer()) {
                detail::bad_field_type(source, line, "n_mode_depth", "a 4x4 integer array");
            }
            f.n_mode_depth[c][d] = row[d].get<std::int64_t>();
        }
    }
    f.n_cbf = detail::get_int(object, "n_cbf", source, line);
    f.n_coeff = detail::get_int(object, "n_coeff", source, line);
    f.sum_log2_abs = detail::get_double(object, "sum_log2_abs", source, line);
    f.n_nompm = detail::get_int(object, "n_nompm", source, line);
    f.n_tsf = detail::get_int(object, "n_tsf", source, line);

    if (auto violations = validate_counts(f); !violations.empty()) {
        throw ValidationError(at_line(source, line) + violations.front());
    }
    return f;
}

}  // namespace

std::vector<MeasurementPair> read_dataset_file(const std::filesystem::path& path,
                                               const ParseOptions& options,
                                               std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path.string());
    const std::string source = path.string();

    std::vector<MeasurementPair> rows;
    bool header_seen = false;
    std::size_t line_number = 0;
    std::string text;
    while (std::getline(in, text)) {
        ++line_number;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        json object = detail::parse_json_line(source, line_number, text);

        if (!header_seen) {
            detail::check_fields(object, {"kind"}, source, line_number, options, warnings);
            const std::string kind = detail::get_string(object, "kind", source, line_number);
            if (kind != "dataset") {
                throw ValidationError(at_line(source, line_number) + "expected kind 'dataset', got '" +
                                      kind + "'");
            }
            header_seen = true;
            continue;
        }

        const bool has_features = object.contains("features");
        const bool has_trace = object.contains("trace");
        if (has_features == has_trace) {
            throw ValidationError(at_line(source, line_number) +
                                  "row needs exactly one of 'features' or 'trace'");
        }
        detail::check_fields(object,
                             {has_features ? std::string_view("features") : std::string_view("trace"),
                              "energy"},
                             source, line_number, options, warnings);

        MeasurementPair row;
        row.energy = detail::get_double(object, "energy", source, line_number);
        if (!std::isfinite(row.energy)) {
            detail::bad_field_type(source, line_number, "energy", "a finite number");
        }
        if (has_features) {
            row.features =
                counts_from_json(object.at("features"), source, line_number, options, warnings);
        } else {
            std::filesystem::path trace_path =
                detail::get_string(object, "trace", source, line_number);
            if (trace_path.is_relative()) trace_path = path.parent_path() / trace_path;
            const Trace trace = read_trace_file(trace_path, options, warnings);
            row.features = aggregate(trace.header, trace.records);
        }
        rows.push_back(std::move(row));
    }
    if (!header_seen) {
        throw ValidationError(source + ": missing dataset header line");
    }
    return rows;
}

void write_dataset_file(const std::filesystem::path& path, std::span<const MeasurementPair> rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset file: " + path.string());
    out << ordered_json{{"kind", "dataset"}}.dump() << '\n';
    for (const MeasurementPair& row : rows) {
        ordered_json object;
        object["features"] = row.features;
        object["energy"] = row.energy;
        out << object.dump() << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<FeatureCounts> read_features_file(const std::filesystem::path& path,
                                              const ParseOptions& options,
                                              std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open features file: " + path.string());
    const std::string source = path.string();

    std::vector<FeatureCounts> rows;
    std::size_t line_number = 0;
    std::string text;
    while (std::getline(in, text)) {
        ++line_number;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        const json object = detail::parse_json_line(source, line_number, text);
        rows.push_back(counts_from_json(object, source, line_number, options, warnings));
    }
    return rows;
}

void write_features_file(const std::filesystem::path& path,
                         std::span<const FeatureCounts> features) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write features file: " + path.string());
    for (const FeatureCounts& f : features) {
        ordered_json object = f;
        out << object.dump() << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

SimulatorConfig read_simulator_config(const std::filesystem::path& path,
                                      const ParseOptions& options,
                                      std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open simulator config: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string source = path.string();
    const json object = detail::parse_json_line(source, 1, buffer.str());

    for (const auto& [key, value] : object.items()) {
        if (key == "truth_profile" || key == "noise_rel" || key == "seed") continue;
        if (!options.lenient) {
            throw ValidationError(source + ": unknown field '" + key +
                                  "' (pass --lenient to ignore)");
        }
        if (warnings != nullptr) {
            warnings->push_back(source + ": ignoring unknown field '" + key + "'");
        }
    }
    if (!object.contains("truth_profile")) {
        throw ValidationError(source + ": missing field 'truth_profile'");
    }

    SimulatorConfig config;
    const std::string profile = detail::get_string(object, "truth_profile", source, 1);
    if (profile == "builtin") {
        config.truth = builtin_constants();
    } else {
        std::filesystem::path profile_path = profile;
        if (profile_path.is_relative()) profile_path = path.parent_path() / profile_path;
        config.truth = load_profile(profile_path);
    }
    if (object.contains("noise_rel")) {
        config.noise_rel = detail::get_double(object, "noise_rel", source, 1);
        if (!std::isfinite(config.noise_rel) || config.noise_rel < 0.0) {
            throw ValidationError(source + ": noise_rel must be finite and nonnegative");
        }
    }
    if (object.contains("seed")) {
        const std::int64_t seed = detail::get_int(object, "seed", source, 1);
        if (seed < 0) throw ValidationError(source + ": seed must be nonnegative");
        config.seed = static_cast<std::uint64_t>(seed);
    }
    return config;
}

}  // namespace decenergy
