#include "decenergy/trace.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "decenergy/errors.hpp"
#include "exact_sum.hpp"
#include "json_io.hpp"

namespace decenergy {

namespace {

bool is_blank(const std::string& line) {
    return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

ModeClass classify_mode(int intra_mode) {
    if (intra_mode < 0 || intra_mode >= num_intra_modes) {
        throw ValidationError("intra mode " + std::to_string(intra_mode) + " outside 0.." +
                              std::to_string(num_intra_modes - 1));
    }
    if (intra_mode == 0) return ModeClass::pla;
    if (intra_mode == 1) return ModeClass::dc;
    if (intra_mode % 8 == 2) return ModeClass::hvd;  // 2, 10, 18, 26, 34
    return ModeClass::ang;
}

std::int64_t FeatureCounts::depth_total(int depth) const {
    std::int64_t total = 0;
    for (const auto& row : n_mode_depth) total += row[depth - 1];
    return total;
}

std::int64_t FeatureCounts::record_total() const {
    std::int64_t total = 0;
    for (const auto& row : n_mode_depth)
        for (std::int64_t n : row) total += n;
    return total;
}

FeatureCounts merge_counts(const FeatureCounts& a, const FeatureCounts& b) {
    FeatureCounts out = a;
    out.n_slice += b.n_slice;
    for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d) out.n_mode_depth[c][d] += b.n_mode_depth[c][d];
    out.n_cbf += b.n_cbf;
    out.n_coeff += b.n_coeff;
    out.sum_log2_abs += b.sum_log2_abs;
    out.n_nompm += b.n_nompm;
    out.n_tsf += b.n_tsf;
    return out;
}

std::vector<std::string> validate_record(const TraceRecord& record) {
    std::vector<std::string> violations;
    if (record.frame_index < 0) violations.push_back("negative frame index");
    if (record.ctu_index < 0) violations.push_back("negative ctu index");
    if (record.depth < min_depth || record.depth > max_depth) {
        violations.push_back("depth " + std::to_string(record.depth) + " outside 1..4");
    }
    if (record.intra_mode < 0 || record.intra_mode >= num_intra_modes) {
        violations.push_back("intra mode " + std::to_string(record.intra_mode) + " outside 0..34");
    }
    if (record.transform_skip && record.depth != max_depth) {
        violations.push_back("TSF outside depth 4");
    }
    for (std::int32_t c : record.coefficients) {
        if (c == 0) {
            violations.push_back("zero coefficient listed");
            break;
        }
    }
    bool any_cbf = record.cbf[0] || record.cbf[1] || record.cbf[2];
    if (!any_cbf && !record.coefficients.empty()) {
        violations.push_back("coefficients present with all CBFs false");
    }
    return violations;
}

std::vector<std::string> validate_counts(const FeatureCounts& counts) {
    std::vector<std::string> violations;
    if (counts.n_slice < 0) violations.push_back("negative n_slice");
    if (counts.qp < 0 || counts.qp > 51) violations.push_back("qp outside 0..51");
    for (const auto& row : counts.n_mode_depth)
        for (std::int64_t n : row)
            if (n < 0) {
                violations.push_back("negative mode/depth count");
                break;
            }
    if (counts.n_cbf < 0) violations.push_back("negative n_cbf");
    if (counts.n_coeff < 0) violations.push_back("negative n_coeff");
    if (counts.sum_log2_abs < 0.0 || !std::isfinite(counts.sum_log2_abs)) {
        violations.push_back("sum_log2_abs not a finite nonnegative value");
    }
    if (counts.n_nompm < 0) violations.push_back("negative n_nompm");
    if (counts.n_tsf < 0) violations.push_back("negative n_tsf");
    if (counts.n_tsf > counts.depth_total(max_depth)) {
        violations.push_back("n_tsf exceeds record count at depth 4");
    }
    if (counts.n_coeff == 0 && counts.sum_log2_abs != 0.0) {
        violations.push_back("sum_log2_abs nonzero with n_coeff zero");
    }
    return violations;
}

FeatureCounts aggregate(const StreamHeader& header, std::span<const TraceRecord> records) {
    FeatureCounts counts;
    counts.n_slice = header.n_slice;
    counts.qp = header.qp;
    detail::ExactSum log_sum;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const TraceRecord& record = records[i];
        if (auto violations = validate_record(record); !violations.empty()) {
            throw ValidationError("record " + std::to_string(i) + ": " + violations.front());
        }
        counts.at(classify_mode(record.intra_mode), record.depth) += 1;
        counts.n_cbf += static_cast<int>(record.cbf[0]) + static_cast<int>(record.cbf[1]) +
                        static_cast<int>(record.cbf[2]);
        counts.n_coeff += static_cast<std::int64_t>(record.coefficients.size());
        for (std::int32_t c : record.coefficients) {
            log_sum.add(std::log2(std::abs(static_cast<double>(c))));
        }
        counts.n_nompm += record.coded_as_mpm ? 0 : 1;
        counts.n_tsf += record.transform_skip ? 1 : 0;
    }
    counts.sum_log2_abs = log_sum.value();
    return counts;
}

namespace {

using detail::json;

TraceRecord record_from_json(const json& object, std::string_view source, std::size_t line,
                             const ParseOptions& options, std::vector<std::string>* warnings) {
    detail::check_fields(object,
                         {"frame", "ctu", "depth", "mode", "mpm", "tsf", "cbf_y", "cbf_cb",
                          "cbf_cr", "coeffs"},
                         source, line, options, warnings);
    TraceRecord record;
    record.frame_index = detail::get_int(object, "frame", source, line);
    record.ctu_index = detail::get_int(object, "ctu", source, line);
    record.depth = static_cast<int>(detail::get_int(object, "depth", source, line));
    record.intra_mode = static_cast<int>(detail::get_int(object, "mode", source, line));
    record.coded_as_mpm = detail::get_bool(object, "mpm", source, line);
    record.transform_skip = detail::get_bool(object, "tsf", source, line);
    record.cbf[0] = detail::get_bool(object, "cbf_y", source, line);
    record.cbf[1] = detail::get_bool(object, "cbf_cb", source, line);
    record.cbf[2] = detail::get_bool(object, "cbf_cr", source, line);
    const auto& coeffs = object.at("coeffs");
    if (!coeffs.is_array()) detail::bad_field_type(source, line, "coeffs", "an array of integers");
    record.coefficients.reserve(coeffs.size());
    for (const auto& c : coeffs) {
        if (!c.is_number_integer()) {
            detail::bad_field_type(source, line, "coeffs", "an array of integers");
        }
        record.coefficients.push_back(c.get<std::int32_t>());
    }
    return record;
}

}  // namespace

Trace read_trace(std::istream& in, const ParseOptions& options,
                 std::vector<std::string>* warnings, std::string_view source_name) {
    Trace trace;
    std::string line;
    std::size_t line_number = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_number;
        if (is_blank(line)) continue;
        json object = detail::parse_json_line(source_name, line_number, line);
        if (!header_seen) {
            detail::check_fields(object, {"n_slice", "qp"}, source_name, line_number, options,
                                 warnings);
            trace.header.n_slice = detail::get_int(object, "n_slice", source_name, line_number);
            trace.header.qp = static_cast<int>(detail::get_int(object, "qp", source_name, line_number));
            if (trace.header.n_slice < 1) {
                throw ValidationError(detail::at_line(source_name, line_number) +
                                      "n_slice must be at least 1");
            }
            if (trace.header.qp < 0 || trace.header.qp > 51) {
                throw ValidationError(detail::at_line(source_name, line_number) +
                                      "qp outside 0..51");
            }
            header_seen = true;
            continue;
        }
        TraceRecord record = record_from_json(object, source_name, line_number, options, warnings);
        if (auto violations = validate_record(record); !violations.empty()) {
            throw ValidationError(detail::at_line(source_name, line_number) + violations.front());
        }
        trace.records.push_back(std::move(record));
    }
    if (!header_seen) {
        throw ValidationError(std::string(source_name) + ": missing header object");
    }
    return trace;
}

Trace read_trace_file(const std::filesystem::path& path, const ParseOptions& options,
                      std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace file: " + path.string());
    return read_trace(in, options, warnings, path.string());
}

void write_trace(std::ostream& out, const Trace& trace) {
    nlohmann::ordered_json header;
    header["n_slice"] = trace.header.n_slice;
    header["qp"] = trace.header.qp;
    out << header.dump() << '\n';
    for (const TraceRecord& record : trace.records) {
        nlohmann::ordered_json object;
        object["frame"] = record.frame_index;
        object["ctu"] = record.ctu_index;
        object["depth"] = record.depth;
        object["mode"] = record.intra_mode;
        object["mpm"] = record.coded_as_mpm;
        object["tsf"] = record.transform_skip;
        object["cbf_y"] = record.cbf[0];
        object["cbf_cb"] = record.cbf[1];
        object["cbf_cr"] = record.cbf[2];
        object["coeffs"] = record.coefficients;
        out << object.dump() << '\n';
    }
}

void write_trace_file(const std::filesystem::path& path, const Trace& trace) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write trace file: " + path.string());
    write_trace(out, trace);
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace decenergy
