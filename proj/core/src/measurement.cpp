#include "decenergy/measurement.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>

#include "decenergy/errors.hpp"
#include "exact_sum.hpp"

namespace decenergy {

void validate_power_log(const PowerLog& log) {
    if (!(log.v0 > 0.0) || !std::isfinite(log.v0)) {
        throw ValidationError("source voltage must be positive");
    }
    if (log.r_a < 0.0 || !std::isfinite(log.r_a)) {
        throw ValidationError("shunt resistance must be nonnegative");
    }
    for (std::size_t i = 0; i < log.samples.size(); ++i) {
        const auto& [t, current] = log.samples[i];
        if (!std::isfinite(t) || !std::isfinite(current)) {
            throw ValidationError("sample " + std::to_string(i) + ": non-finite value");
        }
        if (current < 0.0) {
            throw ValidationError("sample " + std::to_string(i) + ": negative current");
        }
        if (i > 0 && !(t > log.samples[i - 1].first)) {
            throw ValidationError("sample " + std::to_string(i) +
                                  ": timestamps not strictly increasing");
        }
    }
}

double integrate_power_log(const PowerLog& log) {
    validate_power_log(log);
    if (log.samples.size() < 2) {
        throw std::domain_error("power log integration needs at least two samples");
    }
    detail::CompensatedSum current_integral;     // integral of i dt
    detail::CompensatedSum current_sq_integral;  // integral of i^2 dt
    for (std::size_t i = 1; i < log.samples.size(); ++i) {
        const auto& [t0, i0] = log.samples[i - 1];
        const auto& [t1, i1] = log.samples[i];
        double dt = t1 - t0;
        current_integral.add(dt * (i0 + i1) * 0.5);
        // The square of a linear segment is quadratic; its integral has the
        // closed form dt*(i0^2 + i0*i1 + i1^2)/3. Sampling the segment finer
        // must not change the result, so the closed form is used rather than
        // a two-point trapezoid of i^2.
        current_sq_integral.add(dt * (i0 * i0 + i0 * i1 + i1 * i1) / 3.0);
    }
    return log.v0 * current_integral.value() - log.r_a * current_sq_integral.value();
}

DecoderEnergy decoder_energy(const EnergyMeasurement& m) {
    DecoderEnergy result;
    result.joules = m.e_all - m.e_idle;
    if (result.joules < 0.0) {
        result.warning = "decoder energy is negative (idle exceeds total); check the measurement";
    }
    return result;
}

double differential_unit_energy(double e_test, double e_ref, std::int64_t n_units) {
    if (n_units < 1) {
        throw std::domain_error("differential unit energy needs at least one unit");
    }
    return (e_test - e_ref) / static_cast<double>(n_units);
}

namespace {

bool parse_double_token(std::string_view token, double& out) {
    auto result = std::from_chars(token.data(), token.data() + token.size(), out);
    return result.ec == std::errc() && result.ptr == token.data() + token.size() &&
           std::isfinite(out);
}

}  // namespace

PowerLog read_power_log(std::istream& in, std::string_view source_name) {
    PowerLog log;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        std::string where = std::string(source_name) + ":" + std::to_string(line_number) + ": ";
        std::istringstream tokens(line);
        std::string first;
        if (!(tokens >> first) || first.front() == '#') continue;
        if (first == "v0_volts" || first == "shunt_ohms") {
            std::string value_text;
            std::string extra;
            if (!(tokens >> value_text) || (tokens >> extra)) {
                throw ValidationError(where + first + " takes exactly one value");
            }
            double value = 0.0;
            if (!parse_double_token(value_text, value)) {
                throw ValidationError(where + "cannot parse value '" + value_text + "'");
            }
            (first == "v0_volts" ? log.v0 : log.r_a) = value;
            continue;
        }
        if (first == "time_s") {
            std::string second;
            if (!(tokens >> second) || second != "current_a") {
                throw ValidationError(where + "expected column header 'time_s current_a'");
            }
            continue;
        }
        std::string second;
        std::string extra;
        if (!(tokens >> second) || (tokens >> extra)) {
            throw ValidationError(where + "expected two columns: time_s current_a");
        }
        double t = 0.0;
        double current = 0.0;
        if (!parse_double_token(first, t) || !parse_double_token(second, current)) {
            throw ValidationError(where + "cannot parse sample '" + first + " " + second + "'");
        }
        log.samples.emplace_back(t, current);
    }
    validate_power_log(log);
    return log;
}

PowerLog read_power_log_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open power log: " + path.string());
    return read_power_log(in, path.string());
}

}  // namespace decenergy
