#include "epfvst/backtest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>

#include "epfvst/lear.hpp"
#include "epfvst/narx.hpp"
#include "epfvst/rng.hpp"
#include "epfvst/stats.hpp"

namespace epfvst::backtest {

namespace {

constexpr int kLagDays = 7;  // regressors reach back at most seven days

std::string format_value(double v) {
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc())
        throw std::runtime_error("cannot format value");
    return std::string(buf, end);
}

}  // namespace

const char* model_name(ModelKind m) {
    return m == ModelKind::lear ? "lear" : "narx";
}

ModelKind model_from_name(const std::string& name) {
    if (name == "lear")
        return ModelKind::lear;
    if (name == "narx")
        return ModelKind::narx;
    throw std::invalid_argument("unknown model: " + name);
}

std::string stream_name(ModelKind m, vst::Family f, double param, int window) {
    return std::string(model_name(m)) + "/" + vst::family_name(f) + "/" +
           vst::format_param(f, param) + "/" + std::to_string(window);
}

void BacktestPlan::validate(const data::HourlyPanel& panel) const {
    if (windows.empty())
        throw std::invalid_argument("plan has no calibration windows");
    for (int w : windows) {
        if (std::find(std::begin(kAllowedWindows), std::end(kAllowedWindows), w) ==
            std::end(kAllowedWindows))
            throw std::invalid_argument("unsupported calibration window: " + std::to_string(w));
    }
    bool any_param = false;
    for (const auto& [family, params] : grid.values)
        any_param = any_param || !params.empty();
    if (!any_param)
        throw std::invalid_argument("plan has an empty transformation grid");
    if (last_forecast_day < first_forecast_day)
        throw std::invalid_argument("forecast span is reversed");
    const Date panel_last = panel.first_day + (panel.days - 1);
    if (first_forecast_day < panel.first_day || panel_last < last_forecast_day)
        throw std::invalid_argument("forecast span not covered by the panel: " +
                                    first_forecast_day.to_string() + ".." +
                                    last_forecast_day.to_string());
    const int history = first_forecast_day - panel.first_day;
    for (int w : windows) {
        if (history < w + kLagDays)
            throw std::invalid_argument(
                "insufficient history: first forecast day " + first_forecast_day.to_string() +
                " needs " + std::to_string(w + kLagDays) + " prior panel days for window " +
                std::to_string(w) + " but has " + std::to_string(history));
    }
    if (combiner_warmup < 0)
        throw std::invalid_argument("combiner warmup must be >= 0");
    if (combiner_warmup >= forecast_days())
        throw std::invalid_argument("combiner warmup consumes the whole forecast span");
    if (model == ModelKind::narx && narx_ensemble < 1)
        throw std::invalid_argument("narx ensemble size must be >= 1");
}

namespace {

/// Fitted price map for one calibration window: standardize, then transform.
struct DayTransform {
    vst::Standardizer std;
    vst::TransformSpec spec;
    bool fallback = false;
    std::string note;  // reason when fallback is set
};

DayTransform fit_day_transform(std::span<const double> window_prices, vst::Family family,
                               double param, bool mad_adjust) {
    DayTransform t;
    try {
        t.std = vst::fit_standardizer(window_prices, mad_adjust);
        if (family == vst::Family::tpit) {
            t.spec = vst::fit_tpit(window_prices, param, t.std);
        } else {
            t.spec.family = family;
            t.spec.param = param;
            t.spec.validate();
        }
        return t;
    } catch (const std::exception& e) {
        t.note = e.what();
    }
    // Degenerate window: center on the median, keep the scale at one, and
    // skip the transformation so the sweep survives a flat price spell.
    t.std = vst::Standardizer{stats::median(window_prices), 1.0, false};
    t.spec = vst::TransformSpec{};
    t.fallback = true;
    return t;
}

/// Median/MAD standardizer that degrades to center-only on a flat series
/// (a constant regressor carries no signal either way).
vst::Standardizer fit_or_center(std::span<const double> window_values, bool adjust) {
    try {
        return vst::fit_standardizer(window_values, adjust);
    } catch (const std::exception&) {
        return vst::Standardizer{stats::median(window_values), 1.0, false};
    }
}

/// The model's working view for one forecast day: the calibration window plus
/// seven lag days, ending with the forecast day itself. Prices carry the
/// fitted transformation; exogenous series are median/MAD-standardized on the
/// calibration window (no transformation). The forecast day's prices are
/// poisoned with NaN so any accidental read of the realized target surfaces
/// as a non-finite forecast instead of silent leakage.
data::HourlyPanel make_slice(const data::HourlyPanel& panel, int forecast_day, int window,
                             const DayTransform& t, bool mad_adjust) {
    const int base = forecast_day - window - kLagDays;
    const int days = window + kLagDays + 1;
    data::HourlyPanel slice;
    slice.first_day = panel.day(base);
    slice.days = days;
    slice.price.resize(static_cast<size_t>(days) * 24);
    for (int j = 0; j < (days - 1) * 24; ++j)
        slice.price[j] = vst::forward(t.spec, t.std, panel.price[base * 24 + j]);
    for (int h = 0; h < 24; ++h)
        slice.price[(days - 1) * 24 + h] = std::numeric_limits<double>::quiet_NaN();
    const int cal_first = forecast_day - window;  // standardizers see only these days
    const auto hourly = [&](const std::vector<double>& src) {
        const std::span<const double> cal(src.data() + static_cast<long>(cal_first) * 24,
                                          static_cast<size_t>(window) * 24);
        const vst::Standardizer s = fit_or_center(cal, mad_adjust);
        std::vector<double> out(static_cast<size_t>(days) * 24);
        for (int j = 0; j < days * 24; ++j) out[j] = s.to_std(src[base * 24 + j]);
        return out;
    };
    slice.load_fc = hourly(panel.load_fc);
    slice.res_fc = hourly(panel.res_fc);
    const auto daily = [&](const std::vector<double>& src) {
        const std::span<const double> cal(src.data() + cal_first, static_cast<size_t>(window));
        const vst::Standardizer s = fit_or_center(cal, mad_adjust);
        std::vector<double> out(static_cast<size_t>(days));
        for (int j = 0; j < days; ++j) out[j] = s.to_std(src[base + j]);
        return out;
    };
    slice.coal = daily(panel.coal);
    slice.gas = daily(panel.gas);
    slice.oil = daily(panel.oil);
    slice.eua = daily(panel.eua);
    return slice;
}

}  // namespace

ForecastStream run_stream(const data::HourlyPanel& panel, const BacktestPlan& plan, int window,
                          vst::Family family, double param, std::vector<std::string>* log) {
    plan.validate(panel);
    if (std::find(plan.windows.begin(), plan.windows.end(), window) == plan.windows.end())
        throw std::invalid_argument("window not in the plan: " + std::to_string(window));

    ForecastStream out;
    out.model = plan.model;
    out.window = window;
    out.family = family;
    out.param = param;
    out.name = stream_name(plan.model, family, param, window);
    out.first_day = plan.first_forecast_day;
    const int d0 = plan.first_forecast_day - panel.first_day;
    const int n_fc = plan.forecast_days();
    out.fc.resize(static_cast<size_t>(n_fc) * 24);

    for (int i = 0; i < n_fc; ++i) {
        const int di = d0 + i;
        const std::span<const double> cal(panel.price.data() + static_cast<long>(di - window) * 24,
                                          static_cast<size_t>(window) * 24);
        const DayTransform t = fit_day_transform(cal, family, param, plan.mad_adjust);
        if (t.fallback && log)
            log->push_back(out.name + " " + panel.day(di).to_string() +
                           ": degenerate calibration window (" + t.note +
                           "), using center-only identity pipeline");

        const data::HourlyPanel slice = make_slice(panel, di, window, t, plan.mad_adjust);
        const models::DayRange cal_range{kLagDays, window};
        double yhat[24];
        if (plan.model == ModelKind::lear) {
            const models::LearDesign design = models::build_lear_design_all(slice, cal_range);
            const models::LassoProblem problem(design.X);
            const Eigen::VectorXd row = models::lear_forecast_row(slice, window + kLagDays);
            for (int h = 0; h < 24; ++h) {
                const models::LassoFit fit =
                    problem.solve(design.targets.col(h), models::PenaltyRule::info_criterion);
                yhat[h] = models::predict_lear(fit, row);
            }
        } else {
            const std::string day_key = out.name + "/" + panel.day(di).to_string();
            for (int h = 0; h < 24; ++h) {
                std::vector<std::uint64_t> seeds;
                seeds.reserve(plan.narx_ensemble);
                for (int k = 0; k < plan.narx_ensemble; ++k)
                    seeds.push_back(task_seed(plan.seed, day_key + "/h" + std::to_string(h + 1) +
                                                             "/m" + std::to_string(k)));
                const auto ensemble = models::train_narx(slice, cal_range, h + 1, seeds);
                yhat[h] = models::predict_narx(
                    ensemble, models::narx_input(slice, window + kLagDays, h + 1));
            }
        }
        for (int h = 0; h < 24; ++h) {
            const double price = vst::inverse(t.spec, t.std, yhat[h]);
            if (!std::isfinite(price))
                throw std::runtime_error("non-finite forecast for " + out.name + " on " +
                                         panel.day(di).to_string());
            out.fc[static_cast<size_t>(i) * 24 + h] = price;
        }
    }
    return out;
}

BacktestResult run_backtest(const data::HourlyPanel& panel, const BacktestPlan& plan) {
    plan.validate(panel);
    BacktestResult result;
    for (int w : plan.windows)
        for (const auto& [family, params] : plan.grid.values)
            for (double p : params)
                result.streams.push_back(run_stream(panel, plan, w, family, p, &result.log));
    return result;
}

CrystalBallResult crystal_ball(const std::vector<ForecastStream>& streams,
                               const data::HourlyPanel& actual) {
    if (streams.empty())
        throw std::invalid_argument("crystal ball needs at least one stream");
    const Date first = streams.front().first_day;
    const int days = streams.front().days();
    for (const auto& s : streams)
        if (s.first_day != first || s.days() != days)
            throw std::invalid_argument("misaligned calendars in crystal ball pool");
    const int offset = first - actual.first_day;
    if (offset < 0 || offset + days > actual.days)
        throw std::invalid_argument("misaligned calendars: actual prices do not cover the pool");

    // Evaluate in (family, param) order so a tie keeps the smaller parameter.
    std::vector<int> order(streams.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (streams[a].family != streams[b].family)
            return streams[a].family < streams[b].family;
        return streams[a].param < streams[b].param;
    });

    CrystalBallResult result;
    std::vector<long> counts(streams.size(), 0);
    ForecastStream& cb = result.composite;
    cb.model = streams.front().model;
    cb.window = streams.front().window;
    cb.family = streams.front().family;
    cb.param = 0.0;
    bool one_family = true, one_window = true;
    for (const auto& s : streams) {
        one_family = one_family && s.family == cb.family;
        one_window = one_window && s.window == cb.window;
    }
    cb.name = one_family ? std::string("CB(") + vst::family_name(cb.family) + ")" : "CB";
    if (one_window)
        cb.name += "/" + std::to_string(cb.window);
    cb.first_day = first;
    cb.fc.resize(static_cast<size_t>(days) * 24);

    for (int d = 0; d < days; ++d) {
        for (int h = 0; h < 24; ++h) {
            const double truth = actual.price_at(offset + d, h);
            int best = order.front();
            double best_err = std::fabs(streams[best].at(d, h) - truth);
            for (size_t k = 1; k < order.size(); ++k) {
                const int idx = order[k];
                const double err = std::fabs(streams[idx].at(d, h) - truth);
                if (err < best_err) {
                    best = idx;
                    best_err = err;
                }
            }
            cb.fc[static_cast<size_t>(d) * 24 + h] = streams[best].at(d, h);
            ++counts[best];
        }
    }
    for (int idx : order)
        result.histogram.push_back({streams[idx].family, streams[idx].param, counts[idx]});
    return result;
}

void write_stream_csv(const ForecastStream& stream, const std::string& path) {
    const std::filesystem::path p(path);
    if (p.has_parent_path())
        std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path);
    out << "day,hour,value\n";
    for (int d = 0; d < stream.days(); ++d) {
        const std::string day = (stream.first_day + d).to_string();
        for (int h = 0; h < 24; ++h)
            out << day << ',' << h + 1 << ',' << format_value(stream.at(d, h)) << '\n';
    }
    if (!out.flush())
        throw std::runtime_error("write failed: " + path);
}

ForecastStream read_stream_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open stream file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "day,hour,value")
        throw std::runtime_error("malformed stream file " + path + ": bad header");
    ForecastStream s;
    int row = 0;
    while (std::getline(in, line)) {
        const size_t c1 = line.find(',');
        const size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos)
            throw std::runtime_error("malformed stream file " + path + ": row " +
                                     std::to_string(row + 2));
        const Date day = Date::parse(line.substr(0, c1));
        const std::string hour_text = line.substr(c1 + 1, c2 - c1 - 1);
        const std::string value_text = line.substr(c2 + 1);
        int hour = 0;
        auto hr = std::from_chars(hour_text.data(), hour_text.data() + hour_text.size(), hour);
        double value = 0.0;
        auto vr =
            std::from_chars(value_text.data(), value_text.data() + value_text.size(), value);
        if (hr.ec != std::errc() || hr.ptr != hour_text.data() + hour_text.size() ||
            vr.ec != std::errc() || vr.ptr != value_text.data() + value_text.size() ||
            !std::isfinite(value))
            throw std::runtime_error("malformed stream file " + path + ": row " +
                                     std::to_string(row + 2));
        const int expect_hour = row % 24 + 1;
        const Date expect_day = row == 0 ? day : s.first_day + row / 24;
        if (row == 0) {
            if (hour != 1)
                throw std::runtime_error("malformed stream file " + path +
                                         ": must start at hour 1");
            s.first_day = day;
        }
        if (hour != expect_hour || day != expect_day)
            throw std::runtime_error("malformed stream file " + path + ": row " +
                                     std::to_string(row + 2) + " out of order");
        s.fc.push_back(value);
        ++row;
    }
    if (row == 0 || row % 24 != 0)
        throw std::runtime_error("malformed stream file " + path + ": incomplete day");
    return s;
}

}  // namespace epfvst::backtest
