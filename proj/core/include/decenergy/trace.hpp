#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace decenergy {

// Intra prediction modes are grouped into four energy classes: planar,
// DC, the horizontal/vertical/diagonal directions (modes 2, 10, 18, 26,
// 34), and the remaining angular directions.
enum class ModeClass { pla = 0, dc = 1, hvd = 2, ang = 3 };

inline constexpr std::array<std::string_view, 4> mode_class_names = {"pla", "dc", "hvd", "ang"};

inline constexpr int min_depth = 1;
inline constexpr int max_depth = 4;
inline constexpr int num_intra_modes = 35;

// Classifies an intra prediction mode (0..34) into its energy class.
// Throws ValidationError for out-of-range modes.
ModeClass classify_mode(int intra_mode);

// One record per transform unit. In intra coding, prediction and transform
// happen at the same depth, so PU and TU counts coincide and a single record
// carries both the prediction-side and residual-side features.
struct TraceRecord {
    std::int64_t frame_index = 0;
    std::int64_t ctu_index = 0;
    int depth = 1;            // quadtree depth index, 1..4
    int intra_mode = 0;       // 0..34
    bool coded_as_mpm = true;
    bool transform_skip = false;
    std::array<bool, 3> cbf = {false, false, false};  // Y, Cb, Cr
    std::vector<std::int32_t> coefficients;           // nonzero values, all components pooled
};

struct StreamHeader {
    std::int64_t n_slice = 1;
    int qp = 0;  // 0..51
};

// Aggregated feature counts consumed by the energy model.
struct FeatureCounts {
    std::int64_t n_slice = 0;
    int qp = 0;
    // Indexed [mode class][depth - 1].
    std::array<std::array<std::int64_t, 4>, 4> n_mode_depth = {};
    std::int64_t n_cbf = 0;        // set flags, each component counted individually
    std::int64_t n_coeff = 0;      // nonzero coefficients
    double sum_log2_abs = 0.0;     // sum of log2|c| over all coefficients
    std::int64_t n_nompm = 0;      // records not coded as MPM
    std::int64_t n_tsf = 0;        // records with transform skip set

    std::int64_t& at(ModeClass mc, int depth) { return n_mode_depth[static_cast<int>(mc)][depth - 1]; }
    std::int64_t at(ModeClass mc, int depth) const { return n_mode_depth[static_cast<int>(mc)][depth - 1]; }

    // Total records at a depth, summed across mode classes.
    std::int64_t depth_total(int depth) const;
    std::int64_t record_total() const;
};

// Field-wise sum of all counting fields (n_slice included); qp is metadata
// and is taken from the left operand.
FeatureCounts merge_counts(const FeatureCounts& a, const FeatureCounts& b);

// Returns every violated TraceRecord invariant; empty means valid.
std::vector<std::string> validate_record(const TraceRecord& record);

// Returns every violated FeatureCounts invariant; empty means valid.
std::vector<std::string> validate_counts(const FeatureCounts& counts);

// Folds records into feature counts. Record order does not affect the result;
// sum_log2_abs is accumulated exactly and rounded once. Throws ValidationError
// with the record index on the first invalid record.
FeatureCounts aggregate(const StreamHeader& header, std::span<const TraceRecord> records);

struct Trace {
    StreamHeader header;
    std::vector<TraceRecord> records;
};

// File readers share one knob: strict mode rejects unknown fields, lenient
// mode drops them with a warning.
struct ParseOptions {
    bool lenient = false;
};

// Trace files are JSON lines: a header object {"n_slice": N, "qp": Q}
// followed by one object per TU with fields
//   frame, ctu, depth, mode, mpm, tsf, cbf_y, cbf_cb, cbf_cr, coeffs
// Records are validated on read; errors cite the offending line.
Trace read_trace(std::istream& in, const ParseOptions& options = {},
                 std::vector<std::string>* warnings = nullptr,
                 std::string_view source_name = "<stream>");
Trace read_trace_file(const std::filesystem::path& path, const ParseOptions& options = {},
                      std::vector<std::string>* warnings = nullptr);

void write_trace(std::ostream& out, const Trace& trace);
void write_trace_file(const std::filesystem::path& path, const Trace& trace);

}  // namespace decenergy
