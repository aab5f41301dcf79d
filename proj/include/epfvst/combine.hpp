#pragma once

#include <string>
#include <vector>

#include "epfvst/backtest.hpp"
#include "epfvst/dates.hpp"
#include "epfvst/panel.hpp"

namespace epfvst::combine {

/// Aligned set of candidate forecast streams plus the realized prices they
/// are judged against. The first `warmup` days feed subset selection only;
/// combined output starts right after them. Streams are kept sorted by name
/// so enumeration order (and therefore tie-breaking) is reproducible.
struct CombinePool {
    std::vector<backtest::ForecastStream> streams;
    Date first_day;
    int days = 0;
    std::vector<double> actual;  // days*24 realized prices, hour 0..23
    int warmup = 56;
    std::string label;  // appears in output stream names

    double fc(int s, int d, int h) const { return streams[s].fc[d * 24 + h]; }
    double act(int d, int h) const { return actual[d * 24 + h]; }
    int eval_days() const { return days - warmup; }
};

/// Validates and assembles a pool: streams must share calendar and length,
/// carry distinct names, exceed the warmup, and be fully covered by the
/// realized prices. Throws std::invalid_argument naming the violation.
CombinePool make_pool(std::vector<backtest::ForecastStream> streams,
                      const data::HourlyPanel& actual, int warmup, std::string label);

/// One committee decision: the member streams averaged for `hour` from `day`
/// on (fixed schemes) or on `day` exactly (rolling schemes).
struct ComboChoice {
    Date day;
    int hour = 0;  // 1..24 to match the CSV convention
    std::vector<std::string> members;
};

struct CombineResult {
    backtest::ForecastStream stream;
    std::vector<ComboChoice> choices;
};

/// Per hour, the stream with the lowest mean absolute error over the warmup
/// days; the choice is frozen for the whole evaluation span. Ties go to the
/// lexicographically smaller name.
CombineResult sel_fix(const CombinePool& pool);

/// Per evaluation day and hour, the stream with the lowest mean absolute
/// error over the trailing `warmup` days. Same tie rule as sel_fix.
CombineResult sel_roll(const CombinePool& pool);

/// Per hour, the equal-weight mean over the subset of 1..subset_cap streams
/// with the lowest warmup MAE; the subset is frozen thereafter. Ties go to
/// the smaller subset, then lexicographic member names.
CombineResult avg_fix(const CombinePool& pool, int subset_cap = 3);

/// Per evaluation day and hour, re-runs the avg_fix subset search on the
/// trailing `warmup` days and averages the winning subset.
CombineResult avg_roll(const CombinePool& pool, int subset_cap = 3);

/// Audit log of committee decisions, format `day,hour,members` with members
/// joined by '+'. The writer creates missing parent directories.
std::string choices_to_csv(const std::vector<ComboChoice>& choices);
void write_choice_csv(const std::vector<ComboChoice>& choices, const std::string& path);

}  // namespace epfvst::combine
