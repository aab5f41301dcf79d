#pragma once

#include <string>
#include <vector>

#include "epfvst/backtest.hpp"
#include "epfvst/dates.hpp"
#include "epfvst/panel.hpp"

namespace epfvst::eval {

/// `standard` is the conventional mean absolute error. `literal` applies a
/// square root to the daily mean and aggregates daily values by a root mean
/// square, so a constant error of 2 scores sqrt(2) instead of 2.
enum class MaeMode { standard, literal };

const char* mae_mode_name(MaeMode m);
MaeMode mae_mode_from_name(const std::string& name);

/// Per-day error summary of one forecast stream against realized prices,
/// with per-hour absolute errors retained for exact re-aggregation.
struct DailyErrors {
    std::string config;  // stream name
    int window = 0;
    Date first_day;
    MaeMode mode = MaeMode::standard;
    std::vector<double> mae_d;    // one entry per evaluated day
    std::vector<double> abs_err;  // days*24 per-hour |error|, hour 0..23

    int days() const { return static_cast<int>(mae_d.size()); }
};

struct MaeResult {
    DailyErrors daily;
    double aggregate = 0.0;  // EUR/MWh
};

/// Scores `fc` against the realized prices covering it. In standard mode the
/// aggregate is the plain mean of |error| over every (day, hour); in literal
/// mode daily values are sqrt of the daily mean and the aggregate is the
/// root mean square of the daily values. Throws std::invalid_argument when
/// the prices do not cover the stream ("misaligned calendars").
MaeResult mae(const data::HourlyPanel& actual, const backtest::ForecastStream& fc,
              MaeMode mode = MaeMode::standard);

/// Conditional-predictive-ability comparison of two error series.
struct CpaResult {
    double statistic = 0.0;   // chi-squared with 2 degrees of freedom
    double p_value = 1.0;
    int n = 0;                // regression sample size (days - 1)
    double mean_delta = 0.0;  // mean daily loss differential, negative = A better
};

/// Regresses the daily loss differential Delta_d = MAE_d(A) - MAE_d(B) on a
/// constant and its own lag via the instrument-moment form: with
/// h_d = (1, Delta_d) and r_d = h_d * Delta_{d+1}, the statistic is
/// n * rbar' * Omega^-1 * rbar, Omega the outer-product second moment, and
/// the p-value comes from chi-squared with 2 dof. Throws
/// std::invalid_argument on misaligned or too-short series (n >= 30) and
/// std::runtime_error("degenerate loss differential") when the differential
/// is identically zero or Omega is numerically singular.
CpaResult cpa_test(const DailyErrors& a, const DailyErrors& b);

/// Named, ordered, disjoint date ranges for phase-by-phase reporting.
struct RegimeSplit {
    struct Range {
        std::string name;
        Date first;
        Date last;  // inclusive
    };
    std::vector<Range> ranges;

    /// Three two-year phases: 2019-2020, 2021-2022, 2023-2024.
    static RegimeSplit defaults();

    /// Throws std::invalid_argument on an empty split, a reversed range, or
    /// overlapping/unordered ranges.
    void validate() const;
};

/// One (config, regime) cell of the report. `present` is false when the
/// config has no evaluated days inside the regime; such cells are emitted as
/// NA rather than zero.
struct EvalCell {
    std::string config;
    int window = 0;
    std::string regime;
    bool present = false;
    double mae = 0.0;
    bool has_delta = false;
    double delta_vs_baseline = 0.0;  // baseline - config, positive = improvement
};

struct EvalReport {
    std::string baseline;
    std::vector<EvalCell> cells;  // configs sorted by name, regimes in split order
};

/// Aggregates every config's MAE per regime and the improvement over the
/// baseline config. All entries must target the same mode and carry distinct
/// names; the baseline must be present ("baseline not found: <name>").
EvalReport regime_report(const std::vector<DailyErrors>& results, const RegimeSplit& split,
                         const std::string& baseline);

/// One pairwise comparison in the all-pairs matrix. Degenerate pairs are
/// kept with ok=false so the matrix always has K(K-1)/2 rows.
struct CpaCell {
    std::string config_a;
    std::string config_b;
    bool ok = false;
    double statistic = 0.0;
    double p_value = 1.0;
};

/// Every unordered pair (name-sorted), configs sorted by name.
std::vector<CpaCell> cpa_matrix(const std::vector<DailyErrors>& results);

/// Report CSVs. Writers create missing parent directories; absent values are
/// emitted as NA. Formats:
///   mae_summary.csv:     config,window,regime,mae,delta_vs_baseline
///   cpa_matrix.csv:      config_a,config_b,statistic,p_value
///   param_histogram.csv: family,param,count
void write_mae_summary(const EvalReport& report, const std::string& path);
void write_cpa_matrix(const std::vector<CpaCell>& cells, const std::string& path);
void write_param_histogram(const std::vector<backtest::CrystalBallResult::Bin>& bins,
                           const std::string& path);

}  // namespace epfvst::eval
