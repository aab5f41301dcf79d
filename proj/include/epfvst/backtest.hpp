#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epfvst/dates.hpp"
#include "epfvst/panel.hpp"
#include "epfvst/vst.hpp"

namespace epfvst::backtest {

enum class ModelKind { lear, narx };

const char* model_name(ModelKind m);
ModelKind model_from_name(const std::string& name);

/// Rolling-calibration sweep description. The grid map holds one entry per
/// transformation family to run, with the parameter values to sweep.
struct BacktestPlan {
    ModelKind model = ModelKind::lear;
    std::vector<int> windows{56};  // calibration lengths, subset of the five below
    vst::ParamGrid grid;
    Date first_forecast_day;
    Date last_forecast_day;
    int combiner_warmup = 56;  // leading forecast days later consumed by combiners
    std::uint64_t seed = 0;
    bool mad_adjust = false;  // multiply the MAD by the normal-consistency constant
    int narx_ensemble = 10;   // nets averaged per hour (narx model only)

    /// Throws std::invalid_argument on an unsupported window length, an empty
    /// grid, a reversed or uncovered forecast span, or a first forecast day
    /// with fewer than window+7 panel days before it (named in the message).
    void validate(const data::HourlyPanel& panel) const;

    int forecast_days() const { return last_forecast_day - first_forecast_day + 1; }
};

inline constexpr int kAllowedWindows[] = {56, 182, 364, 728, 1456};

/// One named series of daily 24-hour point forecasts on the price scale.
/// Base streams are keyed "<model>/<family>/<param>/<window>"; combined and
/// benchmark streams use "<scheme>(<label>)/<window>".
struct ForecastStream {
    std::string name;
    ModelKind model = ModelKind::lear;
    int window = 0;
    vst::Family family = vst::Family::identity;
    double param = 0.0;
    Date first_day;
    std::vector<double> fc;  // days*24, row-major, hour 0..23

    int days() const { return static_cast<int>(fc.size()) / 24; }
    double at(int d, int h) const { return fc[d * 24 + h]; }
};

std::string stream_name(ModelKind m, vst::Family f, double param, int window);

struct BacktestResult {
    std::vector<ForecastStream> streams;
    std::vector<std::string> log;  // degenerate-window fallbacks and similar events
};

/// One (window, family, param) stream of the plan. Per forecast day: fit the
/// standardizer and transformation on the window ending the day before, fit
/// the model on transformed prices and median/MAD-standardized exogenous
/// series, predict all 24 hours, and map back to the price scale. A price
/// calibration window with zero MAD falls back to a center-only identity
/// pipeline and appends a line to `log`.
ForecastStream run_stream(const data::HourlyPanel& panel, const BacktestPlan& plan, int window,
                          vst::Family family, double param, std::vector<std::string>* log = nullptr);

/// Every stream of the plan: windows in plan order, families in enum order,
/// parameters ascending. Deterministic given the plan seed.
BacktestResult run_backtest(const data::HourlyPanel& panel, const BacktestPlan& plan);

/// Ex-post benchmark: per day and hour, the forecast whose absolute error
/// against the realized price is smallest. Ties pick the smaller parameter,
/// then the lower family enum value. Also counts how often each (family,
/// param) wins; the counts sum to days*24.
struct CrystalBallResult {
    ForecastStream composite;
    struct Bin {
        vst::Family family;
        double param;
        long count;
    };
    std::vector<Bin> histogram;  // one bin per input stream, (family, param) order
};

CrystalBallResult crystal_ball(const std::vector<ForecastStream>& streams,
                               const data::HourlyPanel& actual);

/// CSV persistence, format `day,hour,value` with hours 1..24. The writer
/// creates missing parent directories; metadata lives in the file's path, so
/// the reader fills calendar and values only and the caller sets the rest.
void write_stream_csv(const ForecastStream& stream, const std::string& path);
ForecastStream read_stream_csv(const std::string& path);

}  // namespace epfvst::backtest
