#include "doctest.h"
#include "epfvst/backtest.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <utility>
#include <vector>

#include "epfvst/lear.hpp"
#include "epfvst/rng.hpp"
#include "epfvst/stats.hpp"

using namespace epfvst;
using namespace epfvst::backtest;

namespace {

BacktestPlan plan_for(const data::HourlyPanel& panel, ModelKind model, std::vector<int> windows,
                      vst::Family family, std::vector<double> params, int n_forecast_days) {
    BacktestPlan plan;
    plan.model = model;
    plan.windows = std::move(windows);
    plan.grid.values[family] = std::move(params);
    int max_w = 0;
    for (int w : plan.windows) max_w = std::max(max_w, w);
    plan.first_forecast_day = panel.first_day + (max_w + 7);
    plan.last_forecast_day = plan.first_forecast_day + (n_forecast_days - 1);
    plan.combiner_warmup = 0;
    plan.seed = 99;
    return plan;
}

double stream_mae(const ForecastStream& s, const data::HourlyPanel& actual) {
    const int offset = s.first_day - actual.first_day;
    double acc = 0.0;
    for (int d = 0; d < s.days(); ++d)
        for (int h = 0; h < 24; ++h) acc += std::fabs(s.at(d, h) - actual.price_at(offset + d, h));
    return acc / (s.days() * 24.0);
}

}  // namespace

TEST_CASE("identity run over a synthetic panel covers the forecast span") {
    const auto panel = data::synth_panel(120, 7, data::Regime::stable);
    BacktestPlan plan = plan_for(panel, ModelKind::lear, {56}, vst::Family::identity, {0.0},
                                 120 - 56 - 7);
    plan.combiner_warmup = 56;
    const BacktestResult result = run_backtest(panel, plan);
    REQUIRE(result.streams.size() == 1);
    const ForecastStream& s = result.streams[0];
    CHECK(s.name == "lear/identity/0/56");
    CHECK(s.days() == 57);
    CHECK(s.first_day == panel.first_day + 63);
    for (double v : s.fc) CHECK(std::isfinite(v));
    CHECK(result.log.empty());
}

TEST_CASE("identical plan and seed reproduce the stream bit for bit") {
    const auto panel = data::synth_panel(70, 3, data::Regime::volatile_);
    const BacktestPlan plan =
        plan_for(panel, ModelKind::lear, {56}, vst::Family::asinh, {0.5}, 3);
    const auto a = run_backtest(panel, plan);
    const auto b = run_backtest(panel, plan);
    REQUIRE(a.streams.size() == 1);
    REQUIRE(b.streams.size() == 1);
    CHECK(a.streams[0].fc == b.streams[0].fc);
}

TEST_CASE("a jittered constant panel forecasts the constant") {
    data::HourlyPanel panel = data::synth_panel(70, 1, data::Regime::stable);
    Rng rng(11);
    for (auto& p : panel.price) p = 50.0 + rng.uniform(-1e-4, 1e-4);
    BacktestPlan plan = plan_for(panel, ModelKind::lear, {56}, vst::Family::identity, {0.0}, 2);
    plan.grid.values[vst::Family::asinh] = {0.5};
    const BacktestResult result = run_backtest(panel, plan);
    REQUIRE(result.streams.size() == 2);
    for (const auto& s : result.streams)
        for (double v : s.fc) CHECK(std::fabs(v - 50.0) < 1e-3);
}

TEST_CASE("an exactly flat window falls back to the identity pipeline") {
    data::HourlyPanel panel = data::synth_panel(70, 2, data::Regime::stable);
    for (auto& p : panel.price) p = 40.0;
    const BacktestPlan plan =
        plan_for(panel, ModelKind::lear, {56}, vst::Family::asinh, {0.5}, 2);
    const BacktestResult result = run_backtest(panel, plan);
    REQUIRE(result.streams.size() == 1);
    for (double v : result.streams[0].fc) CHECK(std::fabs(v - 40.0) < 1e-9);
    REQUIRE(result.log.size() == 2);  // one fallback per forecast day
    CHECK(result.log[0].find("zero MAD") != std::string::npos);
    CHECK(result.log[0].find("lear/asinh/0.5/56") != std::string::npos);
    CHECK(result.log[0].find("identity pipeline") != std::string::npos);
}

TEST_CASE("the identity family equals a hand-built standardize-only pipeline") {
    const auto panel = data::synth_panel(70, 5, data::Regime::volatile_);
    const BacktestPlan plan =
        plan_for(panel, ModelKind::lear, {56}, vst::Family::identity, {0.0}, 1);
    const auto result = run_backtest(panel, plan);
    REQUIRE(result.streams.size() == 1);

    // Manual pipeline for the single forecast day (panel day 63): prices and
    // every exogenous series standardized on the calibration window, no
    // transformation on top.
    const int di = 63, w = 56;
    const std::span<const double> cal(panel.price.data() + (di - w) * 24, w * 24);
    const vst::Standardizer std_fit = vst::fit_standardizer(cal, false);
    data::HourlyPanel slice;
    slice.first_day = panel.day(di - w - 7);
    slice.days = w + 8;
    slice.price.resize(slice.days * 24);
    for (int j = 0; j < slice.days * 24; ++j)
        slice.price[j] = std_fit.to_std(panel.price[(di - w - 7) * 24 + j]);
    const auto std24 = [&](const std::vector<double>& v) {
        const std::span<const double> win(v.data() + (di - w) * 24, w * 24);
        const vst::Standardizer s = vst::fit_standardizer(win, false);
        std::vector<double> out(v.begin() + (di - w - 7) * 24, v.begin() + (di + 1) * 24);
        for (auto& x : out) x = s.to_std(x);
        return out;
    };
    slice.load_fc = std24(panel.load_fc);
    slice.res_fc = std24(panel.res_fc);
    const auto std1 = [&](const std::vector<double>& v) {
        const std::span<const double> win(v.data() + (di - w), w);
        const vst::Standardizer s = vst::fit_standardizer(win, false);
        std::vector<double> out(v.begin() + (di - w - 7), v.begin() + (di + 1));
        for (auto& x : out) x = s.to_std(x);
        return out;
    };
    slice.coal = std1(panel.coal);
    slice.gas = std1(panel.gas);
    slice.oil = std1(panel.oil);
    slice.eua = std1(panel.eua);

    const auto design = models::build_lear_design_all(slice, {7, w});
    const models::LassoProblem problem(design.X);
    const Eigen::VectorXd row = models::lear_forecast_row(slice, w + 7);
    for (int h = 0; h < 24; ++h) {
        const auto fit = problem.solve(design.targets.col(h), models::PenaltyRule::info_criterion);
        const double manual = std_fit.from_std(models::predict_lear(fit, row));
        CHECK(std::fabs(manual - result.streams[0].at(0, h)) < 1e-9);
    }
}

TEST_CASE("narx streams are finite, seeded, and seed-sensitive") {
    const auto panel = data::synth_panel(66, 4, data::Regime::stable);
    BacktestPlan plan = plan_for(panel, ModelKind::narx, {56}, vst::Family::identity, {0.0}, 2);
    plan.narx_ensemble = 2;
    const auto a = run_backtest(panel, plan);
    const auto b = run_backtest(panel, plan);
    REQUIRE(a.streams.size() == 1);
    for (double v : a.streams[0].fc) CHECK(std::isfinite(v));
    CHECK(a.streams[0].fc == b.streams[0].fc);
    plan.seed = 100;
    const auto c = run_backtest(panel, plan);
    CHECK(a.streams[0].fc != c.streams[0].fc);
}

TEST_CASE("plan validation rejects bad setups by name") {
    const auto panel = data::synth_panel(80, 6, data::Regime::stable);
    BacktestPlan good = plan_for(panel, ModelKind::lear, {56}, vst::Family::identity, {0.0}, 3);
    CHECK_NOTHROW(good.validate(panel));

    BacktestPlan p = good;
    p.windows = {57};
    CHECK_THROWS_WITH_AS(p.validate(panel), doctest::Contains("unsupported calibration window"),
                         std::invalid_argument);
    p = good;
    p.windows.clear();
    CHECK_THROWS_AS(p.validate(panel), std::invalid_argument);
    p = good;
    p.grid.values.clear();
    CHECK_THROWS_WITH_AS(p.validate(panel), doctest::Contains("empty transformation grid"),
                         std::invalid_argument);
    p = good;
    p.last_forecast_day = p.first_forecast_day - 1;
    CHECK_THROWS_WITH_AS(p.validate(panel), doctest::Contains("reversed"), std::invalid_argument);
    p = good;
    p.first_forecast_day = panel.first_day + 62;  // one day short of 56+7
    p.combiner_warmup = 0;
    CHECK_THROWS_WITH_AS(p.validate(panel), doctest::Contains("insufficient history"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(p.validate(panel),
                         doctest::Contains((panel.first_day + 62).to_string().c_str()),
                         std::invalid_argument);
    p = good;
    p.last_forecast_day = panel.first_day + 100;  // beyond the panel
    CHECK_THROWS_WITH_AS(p.validate(panel), doctest::Contains("not covered"),
                         std::invalid_argument);
    p = good;
    p.combiner_warmup = 3;  // == forecast span
    CHECK_THROWS_WITH_AS(p.validate(panel), doctest::Contains("warmup"), std::invalid_argument);
}

TEST_CASE("crystal ball picks the pointwise winner with deterministic ties") {
    const auto panel = data::synth_panel(40, 8, data::Regime::stable);
    const auto mk = [&](double offset, double param) {
        ForecastStream s;
        s.name = "x";
        s.model = ModelKind::lear;
        s.window = 56;
        s.family = vst::Family::asinh;
        s.param = param;
        s.first_day = panel.first_day + 5;
        s.fc.resize(30 * 24);
        for (int d = 0; d < 30; ++d)
            for (int h = 0; h < 24; ++h) s.fc[d * 24 + h] = panel.price_at(5 + d, h) + offset;
        return s;
    };

    SUBCASE("strict winner takes every slot") {
        const auto a = mk(1.0, 0.3), b = mk(-2.0, 0.7);
        const auto cb = crystal_ball({a, b}, panel);
        CHECK(cb.composite.fc == a.fc);
        CHECK(cb.composite.name == "CB(asinh)/56");
        REQUIRE(cb.histogram.size() == 2);
        CHECK(cb.histogram[0].param == 0.3);
        CHECK(cb.histogram[0].count == 30 * 24);
        CHECK(cb.histogram[1].count == 0);
    }
    SUBCASE("an exact stream is reproduced with a concentrated histogram") {
        const auto exact = mk(0.0, 0.9), off = mk(0.5, 0.1);
        const auto cb = crystal_ball({exact, off}, panel);
        CHECK(cb.composite.fc == exact.fc);
        long total = 0;
        for (const auto& bin : cb.histogram) total += bin.count;
        CHECK(total == 30 * 24);
        CHECK(cb.histogram[1].family == vst::Family::asinh);
        CHECK(cb.histogram[1].param == 0.9);
        CHECK(cb.histogram[1].count == 30 * 24);
    }
    SUBCASE("ties go to the smaller parameter") {
        // Constant prices keep offset arithmetic exact, so every slot ties.
        auto flat = panel;
        for (auto& v : flat.price) v = 48.0;
        auto hi = mk(1.0, 0.4), lo = mk(-1.0, 0.2);
        for (int d = 0; d < 30; ++d)
            for (int h = 0; h < 24; ++h) {
                hi.fc[d * 24 + h] = 49.0;
                lo.fc[d * 24 + h] = 47.0;
            }
        const auto cb = crystal_ball({hi, lo}, flat);
        CHECK(cb.composite.fc == lo.fc);  // |err| tie, param 0.2 < 0.4
        CHECK(cb.histogram[0].param == 0.2);
        CHECK(cb.histogram[0].count == 30 * 24);
    }
    SUBCASE("dominance over noisy streams") {
        Rng rng(17);
        std::vector<ForecastStream> pool;
        for (int k = 0; k < 3; ++k) {
            auto s = mk(0.0, 0.1 * (k + 1));
            for (auto& v : s.fc) v += rng.normal() * (k + 1);
            pool.push_back(std::move(s));
        }
        const auto cb = crystal_ball(pool, panel);
        double best = stream_mae(pool[0], panel);
        for (const auto& s : pool) best = std::min(best, stream_mae(s, panel));
        CHECK(stream_mae(cb.composite, panel) <= best);
        long total = 0;
        for (const auto& bin : cb.histogram) total += bin.count;
        CHECK(total == 30 * 24);
    }
    SUBCASE("misaligned pools are rejected") {
        auto a = mk(1.0, 0.3), b = mk(2.0, 0.5);
        b.first_day = b.first_day + 1;
        CHECK_THROWS_WITH_AS(crystal_ball({a, b}, panel), doctest::Contains("misaligned"),
                             std::invalid_argument);
        auto c = mk(1.0, 0.3);
        c.first_day = panel.first_day + 20;  // runs past the panel's last day
        CHECK_THROWS_WITH_AS(crystal_ball({c}, panel), doctest::Contains("misaligned"),
                             std::invalid_argument);
        CHECK_THROWS_AS(crystal_ball({}, panel), std::invalid_argument);
    }
}

TEST_CASE("stream CSV files round-trip and reject malformed input") {
    const auto panel = data::synth_panel(40, 9, data::Regime::crisis);
    ForecastStream s;
    s.name = "lear/mlog/0.3/56";
    s.first_day = Date(2020, 2, 28);
    s.fc.resize(3 * 24);
    Rng rng(23);
    for (auto& v : s.fc) v = rng.uniform(-250.0, 900.0);

    const std::string dir = "backtest_test_tmp";
    std::filesystem::remove_all(dir);
    const std::string path = dir + "/nested/stream.csv";
    write_stream_csv(s, path);

    const ForecastStream back = read_stream_csv(path);
    CHECK(back.first_day == s.first_day);
    CHECK(back.fc == s.fc);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "day,hour,value");
    std::string first_row;
    std::getline(in, first_row);
    CHECK(first_row.substr(0, 13) == "2020-02-28,1,");
    in.close();

    std::ofstream bad(dir + "/bad.csv");
    bad << "day,hour,value\n2020-01-01,2,5.0\n";
    bad.close();
    CHECK_THROWS_WITH_AS(read_stream_csv(dir + "/bad.csv"), doctest::Contains("hour 1"),
                         std::runtime_error);
    std::ofstream bad2(dir + "/bad2.csv");
    bad2 << "day,hour,value\n2020-01-01,1,5.0\n";
    bad2.close();
    CHECK_THROWS_WITH_AS(read_stream_csv(dir + "/bad2.csv"), doctest::Contains("incomplete"),
                         std::runtime_error);
    CHECK_THROWS_AS(read_stream_csv(dir + "/missing.csv"), std::runtime_error);
    std::filesystem::remove_all(dir);
}
