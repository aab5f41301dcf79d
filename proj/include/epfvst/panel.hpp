#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epfvst/dates.hpp"

namespace epfvst::data {

/// Aligned hourly matrix of day-ahead prices and exogenous regressors.
///
/// Days are contiguous by construction (first_day + index). Hourly series are
/// stored row-major as day*24+hour with wall-clock hour 0..23. Before repair,
/// missing slots are NaN; a repaired panel has no missing values.
struct HourlyPanel {
    Date first_day;
    int days = 0;

    std::vector<double> price;    // EUR/MWh, days*24
    std::vector<double> load_fc;  // MW, days*24
    std::vector<double> res_fc;   // MW, days*24
    std::vector<double> coal;     // daily settlement closes, days
    std::vector<double> gas;
    std::vector<double> oil;
    std::vector<double> eua;

    Date day(int d) const { return first_day + d; }
    int weekday(int d) const { return day(d).weekday(); }  // 1=Mon..7=Sun

    double& at(std::vector<double>& v, int d, int h) { return v[d * 24 + h]; }
    double price_at(int d, int h) const { return price[d * 24 + h]; }
    double load_at(int d, int h) const { return load_fc[d * 24 + h]; }
    double res_at(int d, int h) const { return res_fc[d * 24 + h]; }

    bool has_gaps() const;

    /// Checks the repaired-panel invariants (sizes, all values finite).
    /// Throws std::runtime_error on violation.
    void validate() const;
};

enum class FieldId { price, load_fc, res_fc, coal, gas, oil, eua };

/// One parsed cell of an input file: a timestamped observation of one field.
struct RawRecord {
    Date day;
    int hour = 0;  // 0..23
    FieldId field = FieldId::price;
    double value = 0.0;
};

/// Column-name mapping from the documented CSV schema to a concrete file.
struct CsvSchema {
    std::string timestamp = "timestamp";
    std::string utc_offset = "utc_offset";
    std::string price = "price";
    std::string load_fc = "load_fc";
    std::string res_fc = "res_fc";
    std::string coal = "coal";
    std::string gas = "gas";
    std::string oil = "oil";
    std::string eua = "eua";
};

struct RepairAction {
    Date day;
    int hour = -1;  // -1 for day-level or daily-field actions
    std::string field;
    std::string action;

    std::string to_string() const;
};

struct IngestResult {
    HourlyPanel panel;
    std::vector<RepairAction> log;
};

/// Parses one row per hour, averages duplicate timestamps, repairs the
/// calendar, and forward-fills commodity settlements. Throws
/// std::runtime_error listing row numbers on unparseable rows and
/// "irreparable gap" on contiguous missing blocks longer than a day.
IngestResult ingest_csv(const std::string& path, const CsvSchema& schema = {});

/// Calendar repair on a panel with NaN gaps: isolated missing hours take the
/// mean of the adjacent hours, whole missing days the mean of the same hour
/// on the neighboring days. Hour-level repair runs first. Idempotent.
IngestResult repair_calendar(HourlyPanel panel);

/// Writes the documented CSV schema (one row per hour, hours 1..24, shortest
/// round-trip number formatting).
void write_panel_csv(const HourlyPanel& panel, const std::string& path);

enum class Regime { stable, volatile_, crisis };

Regime regime_from_name(const std::string& name);
const char* regime_name(Regime r);

/// Deterministic synthetic market: seasonal base, AR(1) noise, compound
/// Poisson spikes (negative with probability 0.25), linear load/RES response,
/// and random-walk commodities. `volatile_` ramps spike intensity and noise
/// up in the second half of the sample; `crisis` is elevated throughout.
/// Requires n_days >= 28.
HourlyPanel synth_panel(int n_days, std::uint64_t seed, Regime regime,
                        Date start = Date(2019, 1, 1));

}  // namespace epfvst::data
