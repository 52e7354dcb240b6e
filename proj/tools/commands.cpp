#include "commands.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "decenergy/calibration.hpp"
#include "decenergy/errors.hpp"
#include "decenergy/json.hpp"
#include "decenergy/measurement.hpp"
#include "decenergy/model.hpp"
#include "decenergy/trace.hpp"

namespace decenergy::cli {
namespace {

using nlohmann::ordered_json;

constexpr double accurate_bound = 0.032;
constexpr double simplified_bound = 0.041;
constexpr double bound_tolerance = 1e-12;
constexpr const char* constants_env = "DECENERGY_CONSTANTS";

// Text rendering: scientific notation, 6 significant digits. The machine
// rendering keeps full precision.
std::string sci(double value) {
    std::array<char, 32> buffer{};
    std::snprintf(buffer.data(), buffer.size(), "%.5e", value);
    return buffer.data();
}

struct ConstantsChoice {
    EnergyConstants values;
    std::string origin;  // "builtin" or the profile path
};

ConstantsChoice resolve_constants(const std::string& flag_path) {
    if (!flag_path.empty()) return {load_profile(flag_path), flag_path};
    if (const char* env = std::getenv(constants_env); env != nullptr && *env != '\0') {
        return {load_profile(env), std::string(env)};
    }
    return {builtin_constants(), "builtin"};
}

ordered_json constants_json(const EnergyConstants& k) {
    ordered_json object = ordered_json::object();
    for (const auto& [key, value] : profile_entries(k)) object[key] = value;
    return object;
}

void render_report_text(std::ostream& text, const EstimateReport& report) {
    text << "model " << model_kind_name(report.model_kind) << "\n";
    for (const auto& [name, value] : named_terms(report.terms)) {
        text << "  " << std::left << std::setw(11) << name << " " << sci(value) << "\n";
    }
    text << "  " << std::left << std::setw(11) << "total" << " " << sci(report.total) << " J\n";
    for (const std::string& warning : report.warnings) {
        text << "  warning: " << warning << "\n";
    }
}

void render_trace_line(std::ostream& text, const std::string& trace_path,
                       const FeatureCounts& counts) {
    text << "trace " << trace_path << " (records " << counts.record_total() << ", n_slice "
         << counts.n_slice << ", qp " << counts.qp << ")\n";
}

CommandOutcome do_estimate(const std::string& trace_path, const std::string& constants_path,
                           const std::string& model, const ParseOptions& options,
                           std::vector<std::string>* warnings) {
    const Trace trace = read_trace_file(trace_path, options, warnings);
    const FeatureCounts counts = aggregate(trace.header, trace.records);
    const ConstantsChoice constants = resolve_constants(constants_path);

    std::vector<EstimateReport> reports;
    if (model == "accurate" || model == "both") {
        reports.push_back(estimate_accurate(counts, constants.values));
    }
    if (model == "simplified" || model == "both") {
        reports.push_back(estimate_simplified(counts, constants.values));
    }

    CommandOutcome outcome;
    std::ostringstream text;
    render_trace_line(text, trace_path, counts);
    text << "constants " << constants.origin << "\n";
    for (const EstimateReport& report : reports) {
        text << "\n";
        render_report_text(text, report);
    }
    outcome.text = text.str();

    outcome.machine["trace"] = trace_path;
    outcome.machine["constants"] = constants.origin;
    outcome.machine["records"] = counts.record_total();
    outcome.machine["n_slice"] = counts.n_slice;
    outcome.machine["qp"] = counts.qp;
    outcome.machine["reports"] = reports;
    return outcome;
}

CommandOutcome do_aggregate(const std::string& trace_path, const ParseOptions& options,
                            std::vector<std::string>* warnings) {
    const Trace trace = read_trace_file(trace_path, options, warnings);
    const FeatureCounts counts = aggregate(trace.header, trace.records);

    CommandOutcome outcome;
    std::ostringstream text;
    text << std::left;
    text << std::setw(13) << "n_slice" << " " << counts.n_slice << "\n";
    text << std::setw(13) << "qp" << " " << counts.qp << "\n";
    text << "n_mode_depth (depth 1..4)\n";
    for (std::size_t c = 0; c < mode_class_names.size(); ++c) {
        text << "  " << std::setw(5) << mode_class_names[c];
        for (std::int64_t n : counts.n_mode_depth[c]) text << " " << n;
        text << "\n";
    }
    text << std::setw(13) << "n_cbf" << " " << counts.n_cbf << "\n";
    text << std::setw(13) << "n_coeff" << " " << counts.n_coeff << "\n";
    text << std::setw(13) << "sum_log2_abs" << " " << sci(counts.sum_log2_abs) << "\n";
    text << std::setw(13) << "n_nompm" << " " << counts.n_nompm << "\n";
    text << std::setw(13) << "n_tsf" << " " << counts.n_tsf << "\n";
    outcome.text = text.str();

    outcome.machine = counts;  // the machine report is a feature-counts row
    return outcome;
}

CommandOutcome do_power_integrate(const std::string& log_path, const std::string& idle_path) {
    const PowerLog log = read_power_log_file(log_path);
    const double e_all = integrate_power_log(log);

    CommandOutcome outcome;
    std::ostringstream text;
    std::vector<std::string> warnings;
    if (idle_path.empty()) {
        text << "e_all " << sci(e_all) << " J\n";
        outcome.machine["e_all"] = e_all;
    } else {
        const PowerLog idle_log = read_power_log_file(idle_path);
        const EnergyMeasurement measurement{e_all, integrate_power_log(idle_log)};
        const DecoderEnergy dec = decoder_energy(measurement);
        if (dec.warning) warnings.push_back(*dec.warning);
        text << "e_all  " << sci(measurement.e_all) << " J\n";
        text << "e_idle " << sci(measurement.e_idle) << " J\n";
        text << "e_dec  " << sci(dec.joules) << " J\n";
        outcome.machine["e_all"] = measurement.e_all;
        outcome.machine["e_idle"] = measurement.e_idle;
        outcome.machine["e_dec"] = dec.joules;
    }
    for (const std::string& warning : warnings) text << "warning: " << warning << "\n";
    outcome.machine["warnings"] = warnings;
    outcome.text = text.str();
    return outcome;
}

CommandOutcome do_calibrate(const std::string& dataset_path, const std::string& out_path,
                            const std::string& method, const std::string& constants_path,
                            const ParseOptions& options, std::vector<std::string>* warnings) {
    const std::vector<MeasurementPair> rows = read_dataset_file(dataset_path, options, warnings);

    CommandOutcome outcome;
    std::ostringstream text;
    outcome.machine["method"] = method;
    outcome.machine["rows"] = rows.size();
    text << "method " << method << "\n";
    text << "rows " << rows.size() << "\n";

    if (method == "joint") {
        const FitResult fit = fit_constants(rows);
        save_profile(out_path, fit.constants);

        text << "residual rms " << sci(fit.residual_rms) << " J\n";
        std::vector<std::string> fit_warnings;
        if (fit.condition_warning) fit_warnings.push_back(*fit.condition_warning);
        if (!fit.negative_flags.empty()) {
            std::string joined;
            for (const std::string& name : fit.negative_flags) {
                if (!joined.empty()) joined += ", ";
                joined += name;
            }
            fit_warnings.push_back("fitted below zero: " + joined);
        }
        for (const std::string& warning : fit_warnings) text << "warning: " << warning << "\n";
        text << "wrote " << out_path << "\n";

        outcome.machine["residual_rms"] = fit.residual_rms;
        outcome.machine["negative"] = fit.negative_flags;
        outcome.machine["warnings"] = fit_warnings;
        outcome.machine["profile"] = out_path;
        outcome.machine["constants"] = constants_json(fit.constants);
        outcome.text = text.str();
        return outcome;
    }

    // per-feature: marginal straight-line fits in the style of the
    // single-feature measurement sweeps; meaningful when the dataset varies
    // one feature at a time. Unfitted constants come from the base profile.
    const ConstantsChoice base = resolve_constants(constants_path);
    std::vector<double> coeff_x, val_x, energy;
    coeff_x.reserve(rows.size());
    val_x.reserve(rows.size());
    energy.reserve(rows.size());
    for (const MeasurementPair& row : rows) {
        coeff_x.push_back(static_cast<double>(row.features.n_coeff));
        val_x.push_back(row.features.sum_log2_abs);
        energy.push_back(row.energy);
    }

    EnergyConstants fitted = base.values;
    std::vector<std::string> notes;
    ordered_json fits = ordered_json::object();
    text << "base " << base.origin << "\n";

    auto run_fit = [&](const char* name, std::span<const double> xs, double& slot) {
        try {
            const LineFit fit = fit_energy_line(xs, energy);
            slot = fit.slope;
            text << std::left << std::setw(8) << name << " slope " << sci(fit.slope)
                 << " J  intercept " << sci(fit.intercept) << " J  residual rms "
                 << sci(fit.residual_rms) << " J\n";
            fits[name] = {{"slope", fit.slope},
                          {"intercept", fit.intercept},
                          {"residual_rms", fit.residual_rms}};
            return true;
        } catch (const std::domain_error& e) {
            notes.push_back(std::string(name) + " fit skipped (" + e.what() + ")");
            fits[name] = nullptr;
            return false;
        }
    };
    const bool coeff_ok = run_fit("e_coeff", coeff_x, fitted.e_coeff);
    const bool val_ok = run_fit("e_val", val_x, fitted.e_val);
    if (!coeff_ok && !val_ok) {
        throw CalibrationError("per-feature calibration identified neither e_coeff nor e_val",
                               {"e_coeff", "e_val"});
    }
    save_profile(out_path, fitted);

    for (const std::string& note : notes) text << "note: " << note << "\n";
    text << "wrote " << out_path << "\n";

    outcome.machine["base"] = base.origin;
    outcome.machine["fits"] = fits;
    outcome.machine["notes"] = notes;
    outcome.machine["profile"] = out_path;
    outcome.machine["constants"] = constants_json(fitted);
    outcome.text = text.str();
    return outcome;
}

CommandOutcome do_simulate(const std::string& config_path, const std::string& features_path,
                           const std::string& out_path, const ParseOptions& options,
                           std::vector<std::string>* warnings) {
    const SimulatorConfig config = read_simulator_config(config_path, options, warnings);
    const std::vector<FeatureCounts> features = read_features_file(features_path, options, warnings);
    const std::vector<MeasurementPair> rows = simulate(config, features);
    write_dataset_file(out_path, rows);

    CommandOutcome outcome;
    std::ostringstream text;
    text << "rows " << rows.size() << "\n";
    text << "noise_rel " << sci(config.noise_rel) << "\n";
    text << "seed " << config.seed << "\n";
    text << "wrote " << out_path << "\n";
    outcome.text = text.str();

    outcome.machine["rows"] = rows.size();
    outcome.machine["noise_rel"] = config.noise_rel;
    outcome.machine["seed"] = config.seed;
    outcome.machine["out"] = out_path;
    return outcome;
}

CommandOutcome do_compare(const std::string& trace_path, double measured,
                          const std::string& constants_path, const ParseOptions& options,
                          std::vector<std::string>* warnings) {
    if (!std::isfinite(measured) || measured <= 0.0) {
        throw ValidationError("measured energy must be positive, got " + sci(measured));
    }
    const Trace trace = read_trace_file(trace_path, options, warnings);
    const FeatureCounts counts = aggregate(trace.header, trace.records);
    const ConstantsChoice constants = resolve_constants(constants_path);

    CommandOutcome outcome;
    std::ostringstream text;
    render_trace_line(text, trace_path, counts);
    text << "constants " << constants.origin << "\n";
    text << "measured " << sci(measured) << " J\n\n";

    outcome.machine["trace"] = trace_path;
    outcome.machine["constants"] = constants.origin;
    outcome.machine["records"] = counts.record_total();
    outcome.machine["n_slice"] = counts.n_slice;
    outcome.machine["qp"] = counts.qp;
    outcome.machine["measured"] = measured;
    auto results = ordered_json::array();

    const std::array<EstimateReport, 2> reports = {estimate_accurate(counts, constants.values),
                                                   estimate_simplified(counts, constants.values)};
    for (const EstimateReport& report : reports) {
        const double bound =
            report.model_kind == ModelKind::accurate ? accurate_bound : simplified_bound;
        const char* bound_label = report.model_kind == ModelKind::accurate ? "3.2%" : "4.1%";
        const double eps = relative_error(measured, report.total);

        std::string verdict = "within";
        if (std::abs(eps - bound) <= bound_tolerance) {
            verdict = "at_bound";
        } else if (eps > bound) {
            verdict = "exceeds";
        }
        const char* phrase = verdict == "within"   ? "within the "
                             : verdict == "at_bound" ? "at the "
                                                     : "exceeds the ";

        text << std::left << std::setw(11) << model_kind_name(report.model_kind) << " estimate "
             << sci(report.total) << " J  error " << sci(eps) << "  " << phrase << bound_label
             << " bound\n";
        for (const std::string& warning : report.warnings) {
            text << "  warning: " << warning << "\n";
        }

        ordered_json result;
        result["model"] = std::string(model_kind_name(report.model_kind));
        result["estimate"] = report.total;
        result["relative_error"] = eps;
        result["bound"] = bound;
        result["verdict"] = verdict;
        result["warnings"] = report.warnings;
        results.push_back(std::move(result));
    }
    outcome.machine["results"] = std::move(results);
    outcome.text = text.str();
    return outcome;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"HEVC intra decoding energy toolkit"};
    app.require_subcommand(1);

    bool lenient = false;
    std::string format = "text";
    app.add_flag("--lenient", lenient, "warn on unknown input fields instead of failing");
    app.add_option("--format", format, "report rendering")
        ->check(CLI::IsMember({"text", "machine"}))
        ->capture_default_str();

    const char* constants_help = "constants profile (default: $DECENERGY_CONSTANTS, else builtin)";

    std::string est_trace, est_constants;
    std::string est_model = "both";
    CLI::App* estimate = app.add_subcommand("estimate", "estimate decoding energy from a trace");
    estimate->fallthrough();
    estimate->add_option("trace", est_trace, "trace file (JSON lines)")->required();
    estimate->add_option("--constants", est_constants, constants_help);
    estimate->add_option("--model", est_model, "model to evaluate")
        ->check(CLI::IsMember({"accurate", "simplified", "both"}))
        ->capture_default_str();

    std::string agg_trace;
    CLI::App* aggregate = app.add_subcommand("aggregate", "fold a trace into feature counts");
    aggregate->fallthrough();
    aggregate->add_option("trace", agg_trace, "trace file (JSON lines)")->required();

    std::string pow_log, pow_idle;
    CLI::App* power =
        app.add_subcommand("power-integrate", "convert a current log to energy");
    power->fallthrough();
    power->add_option("log", pow_log, "power log (time_s current_a columns)")->required();
    power->add_option("--idle", pow_idle, "idle-baseline log; also reports e_dec = e_all - e_idle");

    std::string cal_dataset, cal_out, cal_constants;
    std::string cal_method = "joint";
    CLI::App* calibrate =
        app.add_subcommand("calibrate", "fit a constants profile to a measurement dataset");
    calibrate->fallthrough();
    calibrate->add_option("dataset", cal_dataset, "dataset file (JSON lines)")->required();
    calibrate->add_option("--out", cal_out, "profile file to write")->required();
    calibrate->add_option("--method", cal_method, "joint least squares or marginal line fits")
        ->check(CLI::IsMember({"joint", "per-feature"}))
        ->capture_default_str();
    calibrate->add_option("--constants", cal_constants,
                          "base profile for per-feature (default: $DECENERGY_CONSTANTS, else builtin)");

    std::string sim_config, sim_features, sim_out;
    CLI::App* simulate =
        app.add_subcommand("simulate", "generate a synthetic measurement dataset");
    simulate->fallthrough();
    simulate->add_option("config", sim_config, "simulator config (JSON)")->required();
    simulate->add_option("features", sim_features, "feature-counts file (JSON lines)")->required();
    simulate->add_option("--out", sim_out, "dataset file to write")->required();

    std::string cmp_trace, cmp_constants;
    double cmp_measured = 0.0;
    CLI::App* compare =
        app.add_subcommand("compare", "compare model estimates against a measured energy");
    compare->fallthrough();
    compare->add_option("trace", cmp_trace, "trace file (JSON lines)")->required();
    compare->add_option("measured", cmp_measured, "measured decoding energy in joules")->required();
    compare->add_option("--constants", cmp_constants, constants_help);

    try {
        std::vector<const char*> argv;
        argv.reserve(args.size() + 1);
        argv.push_back("decenergy");
        for (const std::string& arg : args) argv.push_back(arg.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    const ParseOptions options{lenient};
    std::vector<std::string> parse_warnings;
    const auto flush_warnings = [&] {
        for (const std::string& warning : parse_warnings) err << "warning: " << warning << "\n";
    };

    try {
        CommandOutcome outcome;
        if (*estimate) {
            outcome = do_estimate(est_trace, est_constants, est_model, options, &parse_warnings);
        } else if (*aggregate) {
            outcome = do_aggregate(agg_trace, options, &parse_warnings);
        } else if (*power) {
            outcome = do_power_integrate(pow_log, pow_idle);
        } else if (*calibrate) {
            outcome = do_calibrate(cal_dataset, cal_out, cal_method, cal_constants, options,
                                   &parse_warnings);
        } else if (*simulate) {
            outcome = do_simulate(sim_config, sim_features, sim_out, options, &parse_warnings);
        } else {
            outcome = do_compare(cmp_trace, cmp_measured, cmp_constants, options, &parse_warnings);
        }
        flush_warnings();
        if (format == "machine") {
            out << outcome.machine.dump() << "\n";
        } else {
            out << outcome.text;
        }
        return outcome.exit_code;
    } catch (const ValidationError& e) {
        flush_warnings();
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        flush_warnings();
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::domain_error& e) {
        flush_warnings();
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        flush_warnings();
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace decenergy::cli
