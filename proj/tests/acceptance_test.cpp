// Acceptance gate: one test per shipping criterion, each printing a single
// pass/fail line with its runtime. Run this binary directly for the summary,
// or through ctest where every criterion is its own test.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <decenergy/calibration.hpp>
#include <decenergy/errors.hpp>
#include <decenergy/measurement.hpp>
#include <decenergy/model.hpp>
#include <decenergy/trace.hpp>

#include "support/generators.hpp"

namespace {

using namespace decenergy;
namespace fs = std::filesystem;
using nlohmann::json;

const fs::path data_dir{DECENERGY_TEST_DATA_DIR};

// Prints the criterion verdict when the enclosing test body ends, after
// checking the runtime budget.
class Criterion {
  public:
    Criterion(int id, const char* label, double limit_seconds)
        : id_(id), label_(label), limit_seconds_(limit_seconds),
          start_(std::chrono::steady_clock::now()) {}

    ~Criterion() {
        double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        EXPECT_LE(elapsed, limit_seconds_) << "criterion " << id_ << " exceeded its time budget";
        bool failed = ::testing::Test::HasFailure();
        std::printf("acceptance %d (%s): %s [%.2f s]\n", id_, label_, failed ? "FAIL" : "pass",
                    elapsed);
        std::fflush(stdout);
    }

  private:
    int id_;
    const char* label_;
    double limit_seconds_;
    std::chrono::steady_clock::time_point start_;
};

struct ToolResult {
    int code = -1;
    std::string out;
};

// Runs the installed CLI binary and captures stdout. Arguments are paths and
// plain numbers, so single-quote wrapping is enough.
ToolResult run_tool(const std::vector<std::string>& args) {
    std::string command = DECENERGY_BIN;
    for (const std::string& arg : args) command += " '" + arg + "'";
    command += " 2>/dev/null";
    FILE* pipe = ::popen(command.c_str(), "r");
    if (pipe == nullptr) return {};
    ToolResult result;
    std::array<char, 4096> buffer;
    std::size_t n = 0;
    while ((n = std::fread(buffer.data(), 1, buffer.size(), pipe)) > 0) {
        result.out.append(buffer.data(), n);
    }
    int status = ::pclose(pipe);
    result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string format_double(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof buffer, "%.17g", value);
    return buffer;
}

class TempDir {
  public:
    TempDir() {
        root_ = fs::temp_directory_path() /
                ("decenergy_accept_" + std::to_string(std::random_device{}()));
        fs::create_directories(root_);
    }
    ~TempDir() { fs::remove_all(root_); }
    fs::path operator/(const char* name) const { return root_ / name; }

  private:
    fs::path root_;
};

TEST(Acceptance, Criterion1ConstantFidelity) {
    Criterion c(1, "constant-fidelity", 1.0);

    std::ifstream golden(data_dir / "golden_builtin_profile.txt", std::ios::binary);
    ASSERT_TRUE(golden.good());
    std::stringstream content;
    content << golden.rdbuf();

    EXPECT_EQ(profile_to_string(builtin_constants()), content.str());
}

TEST(Acceptance, Criterion2ModeSpread) {
    Criterion c(2, "mode-spread", 1.0);

    auto spread = mode_spread(builtin_constants());
    for (int depth = 0; depth < 4; ++depth) {
        EXPECT_LT(spread[depth], 0.04) << "depth index " << depth;
    }
}

TEST(Acceptance, Criterion3ModelArithmetic) {
    Criterion c(3, "model-arithmetic", 5.0);

    std::mt19937_64 rng(900301);
    EnergyConstants k = builtin_constants();
    DesignVector kv = constants_as_vector(k);

    for (int trial = 0; trial < 1000; ++trial) {
        FeatureCounts f = decenergy::testing::random_counts(rng);
        double total = estimate_accurate(f, k).total;

        // Oracle 1: design-vector dot product.
        DesignVector v = design_vector(f);
        long double dot = 0.0L;
        for (std::size_t i = 0; i < v.size(); ++i) {
            dot += static_cast<long double>(v[i]) * static_cast<long double>(kv[i]);
        }

        // Oracle 2: term-by-term re-summation, separate from the production
        // accumulation path.
        long double resum = k.e0;
        resum += static_cast<long double>(k.e_slice) * static_cast<long double>(f.n_slice);
        for (int mode_class = 0; mode_class < 4; ++mode_class) {
            for (int depth = 0; depth < 4; ++depth) {
                resum += static_cast<long double>(k.e_mode_depth[mode_class][depth]) *
                         static_cast<long double>(f.n_mode_depth[mode_class][depth]);
            }
        }
        resum += static_cast<long double>(k.e_cbf) * static_cast<long double>(f.n_cbf);
        resum += static_cast<long double>(k.e_coeff) * static_cast<long double>(f.n_coeff);
        resum += static_cast<long double>(k.e_val) * static_cast<long double>(f.sum_log2_abs);
        resum += static_cast<long double>(k.e_nompm) * static_cast<long double>(f.n_nompm);
        resum -= static_cast<long double>(k.e_tsf) * static_cast<long double>(f.n_tsf);

        double tolerance = 1e-12 * std::abs(total);
        EXPECT_NEAR(total, static_cast<double>(dot), tolerance);
        EXPECT_NEAR(total, static_cast<double>(resum), tolerance);
    }
}

TEST(Acceptance, Criterion4SimplifiedConsistency) {
    Criterion c(4, "simplified-consistency", 5.0);

    std::mt19937_64 rng(900401);
    for (int trial = 0; trial < 1000; ++trial) {
        EnergyConstants k = decenergy::testing::averaged_profile(rng);
        FeatureCounts f = decenergy::testing::random_counts(rng);
        f.qp = std::uniform_int_distribution<int>(31, 51)(rng);
        f.n_tsf = 0;
        f.n_nompm = 0;
        f.sum_log2_abs = 0.0;  // every coefficient magnitude is 1

        EstimateReport simplified = estimate_simplified(f, k);
        EstimateReport accurate = estimate_accurate(f, k);
        EXPECT_EQ(simplified.total, accurate.total);
        EXPECT_TRUE(simplified.warnings.empty());
    }
}

TEST(Acceptance, Criterion5PowerIntegration) {
    Criterion c(5, "power-integration", 5.0);

    // Constant current: closed-form supply-minus-shunt energy.
    PowerLog constant;
    constant.samples = {{0.0, 0.5}, {2.0, 0.5}};
    EXPECT_NEAR(integrate_power_log(constant), 5.15, 1e-12);

    // Piecewise-linear logs against a 1000x-denser resampling oracle. The
    // oracle interpolates the polyline on the fine grid and integrates each
    // fine cell with Simpson's rule, which is exact for the quadratic i^2.
    std::mt19937_64 rng(900501);
    std::uniform_real_distribution<double> current(0.0, 1.5);
    std::uniform_real_distribution<double> step(0.005, 0.3);

    for (int trial = 0; trial < 50; ++trial) {
        PowerLog log;
        log.v0 = 5.2;
        log.r_a = 0.1;
        double t = 0.0;
        int segments = 100;
        for (int i = 0; i <= segments; ++i) {
            log.samples.emplace_back(t, current(rng));
            t += step(rng);
        }

        long double charge = 0.0L;   // integral of i dt
        long double square = 0.0L;   // integral of i^2 dt
        constexpr int refine = 1000;
        for (std::size_t s = 0; s + 1 < log.samples.size(); ++s) {
            const auto [t0, i0] = log.samples[s];
            const auto [t1, i1] = log.samples[s + 1];
            const long double dt = static_cast<long double>(t1) - static_cast<long double>(t0);
            const long double h = dt / refine;
            auto lerp = [&](long double u) {
                return static_cast<long double>(i0) +
                       (static_cast<long double>(i1) - static_cast<long double>(i0)) * u;
            };
            for (int cell = 0; cell < refine; ++cell) {
                long double ua = static_cast<long double>(cell) / refine;
                long double ub = static_cast<long double>(cell + 1) / refine;
                long double um = (ua + ub) / 2.0L;
                long double fa = lerp(ua), fb = lerp(ub), fm = lerp(um);
                charge += h / 6.0L * (fa + 4.0L * fm + fb);
                square += h / 6.0L * (fa * fa + 4.0L * fm * fm + fb * fb);
            }
        }
        const long double oracle = 5.2L * charge - 0.1L * square;
        const double production = integrate_power_log(log);
        EXPECT_NEAR(production, static_cast<double>(oracle),
                    1e-9 * std::abs(static_cast<double>(oracle)));
    }
}

TEST(Acceptance, Criterion6CalibrationRoundTrip) {
    Criterion c(6, "calibration-round-trip", 30.0);

    const EnergyConstants truth = builtin_constants();
    const DesignVector truth_vec = constants_as_vector(truth);

    // Noiseless: a spanning design two rows above the minimum.
    {
        auto rows = decenergy::testing::spanning_design();
        ASSERT_GE(rows.size(), 22u);
        auto dataset = simulate({truth, 0.0, 0}, rows);
        FitResult fit = fit_constants(dataset);
        DesignVector got = constants_as_vector(fit.constants);
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_NEAR(got[i], truth_vec[i], 1e-9 * std::abs(truth_vec[i]))
                << constant_names()[i];
        }
    }

    // 1% multiplicative noise, 500 rows, pinned seed.
    {
        auto rows = decenergy::testing::noisy_design();
        ASSERT_EQ(rows.size(), 500u);
        auto dataset = simulate({truth, 0.01, 20260819}, rows);
        FitResult fit = fit_constants(dataset);
        DesignVector got = constants_as_vector(fit.constants);
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_NEAR(got[i], truth_vec[i], 0.05 * std::abs(truth_vec[i]))
                << constant_names()[i];
        }
    }
}

TEST(Acceptance, Criterion7FitRecovery) {
    Criterion c(7, "fit-recovery", 5.0);

    // Exact lines reproduce the per-coefficient and per-log2-unit energies.
    {
        std::vector<CoeffPoint> points;
        for (std::int64_t n = 0; n <= 2000; n += 200) {
            points.push_back({n, 0.02 + 2.064e-7 * static_cast<double>(n)});
        }
        LineFit fit = fit_coeff_energy(points);
        EXPECT_NEAR(fit.slope, 2.064e-7, 1e-12 * 2.064e-7);
    }
    {
        std::vector<ValuePoint> points;
        for (std::int64_t v : {1, 2, 4, 8, 16, 32, 64, 128, 3, 5, 9, 17, 33, 65, 129, 255}) {
            points.push_back({v, 0.04 + 1.729e-7 * std::log2(static_cast<double>(v))});
        }
        LineFit fit = fit_value_energy(points);
        EXPECT_NEAR(fit.slope, 1.729e-7, 1e-12 * 1.729e-7);
    }

    // Seeded 1% multiplicative noise. The sweeps dominate the energies (the
    // per-unit regime), which is what makes slope recovery meaningful under
    // relative noise.
    std::mt19937_64 rng(900701);
    std::normal_distribution<double> noise(0.0, 0.01);
    {
        std::vector<CoeffPoint> points;
        for (int i = 0; i < 100; ++i) {
            std::int64_t n = 10101 * i;
            double clean = 8.0e-7 + 2.064e-7 * static_cast<double>(n);
            points.push_back({n, clean * (1.0 + noise(rng))});
        }
        LineFit fit = fit_coeff_energy(points);
        EXPECT_NEAR(fit.slope, 2.064e-7, 0.03 * 2.064e-7);
    }
    {
        std::vector<ValuePoint> points;
        for (int i = 0; i < 500; ++i) {
            std::int64_t v = 2 + (i * 7) % 254;
            double clean = 2.0e-6 + 1.729e-7 * std::log2(static_cast<double>(v));
            points.push_back({v, clean * (1.0 + noise(rng))});
        }
        LineFit fit = fit_value_energy(points);
        EXPECT_NEAR(fit.slope, 1.729e-7, 0.03 * 1.729e-7);
    }
}

TEST(Acceptance, Criterion8TracePipeline) {
    Criterion c(8, "trace-pipeline", 10.0);

    std::mt19937_64 rng(900801);

    // Aggregation is a homomorphism over record splits.
    for (int trial = 0; trial < 200; ++trial) {
        auto records = decenergy::testing::random_records(rng, 120);
        StreamHeader header = decenergy::testing::random_header(rng);
        std::size_t cut = std::uniform_int_distribution<std::size_t>(0, records.size())(rng);

        FeatureCounts whole = aggregate(header, records);
        std::span<const TraceRecord> all(records);
        StreamHeader tail = header;
        tail.n_slice = 0;  // the slice count enters once, from the header
        FeatureCounts merged =
            merge_counts(aggregate(header, all.subspan(0, cut)), aggregate(tail, all.subspan(cut)));

        EXPECT_EQ(whole.n_slice, merged.n_slice);
        EXPECT_EQ(whole.n_mode_depth, merged.n_mode_depth);
        EXPECT_EQ(whole.n_cbf, merged.n_cbf);
        EXPECT_EQ(whole.n_coeff, merged.n_coeff);
        EXPECT_EQ(whole.n_nompm, merged.n_nompm);
        EXPECT_EQ(whole.n_tsf, merged.n_tsf);
        EXPECT_NEAR(whole.sum_log2_abs, merged.sum_log2_abs,
                    1e-12 * std::max(1.0, whole.sum_log2_abs));
    }

    // Serialize-parse round trips reproduce the counts bit for bit.
    for (int trial = 0; trial < 25; ++trial) {
        Trace trace;
        trace.header = decenergy::testing::random_header(rng);
        trace.records = decenergy::testing::random_records(rng, 200);

        std::stringstream buffer;
        write_trace(buffer, trace);
        Trace parsed = read_trace(buffer);

        FeatureCounts before = aggregate(trace.header, trace.records);
        FeatureCounts after = aggregate(parsed.header, parsed.records);
        EXPECT_EQ(before.n_slice, after.n_slice);
        EXPECT_EQ(before.qp, after.qp);
        EXPECT_EQ(before.n_mode_depth, after.n_mode_depth);
        EXPECT_EQ(before.n_cbf, after.n_cbf);
        EXPECT_EQ(before.n_coeff, after.n_coeff);
        EXPECT_EQ(before.sum_log2_abs, after.sum_log2_abs);
        EXPECT_EQ(before.n_nompm, after.n_nompm);
        EXPECT_EQ(before.n_tsf, after.n_tsf);
    }

    // Every structural rule trips on its dedicated corpus file.
    struct Case {
        const char* file;
        const char* needle;
    };
    const Case cases[] = {
        {"bad_tsf_depth.jsonl", "TSF outside depth 4"},
        {"bad_zero_coeff.jsonl", "zero coefficient"},
        {"bad_cbf_coeffs.jsonl", "CBFs false"},
    };
    for (const Case& test_case : cases) {
        try {
            read_trace_file(data_dir / test_case.file);
            ADD_FAILURE() << test_case.file << " parsed without error";
        } catch (const ValidationError& error) {
            EXPECT_NE(std::string(error.what()).find(test_case.needle), std::string::npos)
                << test_case.file << " raised: " << error.what();
        }
    }
}

TEST(Acceptance, Criterion9EndToEnd) {
    Criterion c(9, "end-to-end", 30.0);

    ASSERT_TRUE(fs::exists(DECENERGY_BIN)) << "tool binary not built: " << DECENERGY_BIN;
    TempDir dir;

    // A stream with every feature active.
    Trace trace;
    trace.header = {3, 36};
    std::mt19937_64 rng(900901);
    trace.records = decenergy::testing::random_records(rng, 400);
    const fs::path trace_path = dir / "stream.jsonl";
    write_trace_file(trace_path, trace);

    // simulate: noiseless ground-truth dataset over a spanning design.
    {
        std::ofstream config(dir / "sim.json");
        config << "{\"truth_profile\": \"builtin\"}\n";
    }
    write_features_file(dir / "features.jsonl", decenergy::testing::spanning_design());
    ToolResult simulated = run_tool({"simulate", (dir / "sim.json").string(),
                                     (dir / "features.jsonl").string(), "--out",
                                     (dir / "dataset.jsonl").string()});
    ASSERT_EQ(simulated.code, 0) << simulated.out;

    // calibrate: recover a constants profile from the dataset.
    ToolResult calibrated = run_tool({"calibrate", (dir / "dataset.jsonl").string(), "--out",
                                      (dir / "fit.profile").string()});
    ASSERT_EQ(calibrated.code, 0) << calibrated.out;

    // estimate with the calibrated profile.
    ToolResult estimated = run_tool({"--format", "machine", "estimate", trace_path.string(),
                                     "--constants", (dir / "fit.profile").string()});
    ASSERT_EQ(estimated.code, 0) << estimated.out;
    json estimate_report = json::parse(estimated.out);
    const double calibrated_total = estimate_report["reports"][0]["total"].get<double>();
    EXPECT_GT(calibrated_total, 0.0);

    // compare against a "measurement" equal to the estimate: the calibrated
    // profile came from noiseless truth, so the error must be exactly zero.
    ToolResult compared =
        run_tool({"--format", "machine", "compare", trace_path.string(),
                  format_double(calibrated_total), "--constants", (dir / "fit.profile").string()});
    ASSERT_EQ(compared.code, 0) << compared.out;
    json compare_report = json::parse(compared.out);
    EXPECT_EQ(compare_report["results"][0]["model"], "accurate");
    EXPECT_EQ(compare_report["results"][0]["relative_error"].get<double>(), 0.0);
    EXPECT_EQ(compare_report["results"][0]["verdict"], "within");

    // Constructed boundary cases around the published bounds, with the
    // builtin profile.
    json builtin_report =
        json::parse(run_tool({"--format", "machine", "estimate", trace_path.string()}).out);
    const double accurate = builtin_report["reports"][0]["total"].get<double>();
    const double simplified = builtin_report["reports"][1]["total"].get<double>();

    auto verdicts = [&](double measured) {
        ToolResult result = run_tool(
            {"--format", "machine", "compare", trace_path.string(), format_double(measured)});
        EXPECT_EQ(result.code, 0);
        json report = json::parse(result.out);
        return std::pair{report["results"][0]["verdict"].get<std::string>(),
                         report["results"][1]["verdict"].get<std::string>()};
    };

    EXPECT_EQ(verdicts(accurate / 1.032).first, "at_bound");
    EXPECT_EQ(verdicts(accurate / 1.05).first, "exceeds");
    EXPECT_EQ(verdicts(accurate / 1.0001).first, "within");
    EXPECT_EQ(verdicts(simplified / 1.041).second, "at_bound");
    EXPECT_EQ(verdicts(simplified / 1.06).second, "exceeds");
}

}  // namespace
