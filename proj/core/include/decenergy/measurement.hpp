#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace decenergy {

// Raw current samples from a supply/ampere-meter setup. The meter's shunt
// dissipates r_a * i^2, which must be subtracted from the supply energy.
struct PowerLog {
    std::vector<std::pair<double, double>> samples;  // (t seconds, i amperes)
    double v0 = 5.2;   // source voltage, volts
    double r_a = 0.1;  // ampere meter shunt, ohms
};

struct EnergyMeasurement {
    double e_all = 0.0;   // total energy while the decoder ran, joules
    double e_idle = 0.0;  // idle baseline over the same window, joules
};

// Checks PowerLog invariants: strictly increasing timestamps, nonnegative
// currents, v0 > 0, r_a >= 0. Throws ValidationError on the first violation.
void validate_power_log(const PowerLog& log);

// E = v0 * integral(i dt) - r_a * integral(i^2 dt), with the current treated
// as piecewise linear between samples and each segment integrated in closed
// form (the trapezoid for i, the exact quadratic integral for i^2), so
// refining a log on its own polyline does not move the result. A
// constant-current log reduces to v0*I*T - r_a*I^2*T. Throws
// std::domain_error for fewer than two samples, ValidationError for invalid
// logs.
double integrate_power_log(const PowerLog& log);

struct DecoderEnergy {
    double joules = 0.0;
    std::optional<std::string> warning;  // set when the value is negative
};

// e_all - e_idle. A negative result is reported, not clamped; it signals a
// measurement fault and carries a warning.
DecoderEnergy decoder_energy(const EnergyMeasurement& m);

// (e_test - e_ref) / n_units: per-unit energy when a test stream repeats the
// reference content plus n_units identically coded units. Throws
// std::domain_error for n_units < 1.
double differential_unit_energy(double e_test, double e_ref, std::int64_t n_units);

// Power log file: two whitespace-separated columns (time_s, current_a),
// '#' comments, optional "v0_volts <x>" and "shunt_ohms <x>" header lines,
// optional "time_s current_a" column header. Defaults: 5.2 V, 0.1 ohm.
PowerLog read_power_log(std::istream& in, std::string_view source_name = "<stream>");
PowerLog read_power_log_file(const std::filesystem::path& path);

}  // namespace decenergy
