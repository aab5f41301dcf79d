#include "doctest.h"
#include "epfvst/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "epfvst/rng.hpp"

using namespace epfvst;
using namespace epfvst::eval;
using backtest::ForecastStream;

namespace {

data::HourlyPanel flat_panel(int days, double price) {
    auto panel = data::synth_panel(std::max(days, 28), 1, data::Regime::stable);
    panel.days = days;
    panel.price.assign(static_cast<std::size_t>(days) * 24, price);
    panel.load_fc.resize(static_cast<std::size_t>(days) * 24);
    panel.res_fc.resize(static_cast<std::size_t>(days) * 24);
    panel.coal.resize(days);
    panel.gas.resize(days);
    panel.oil.resize(days);
    panel.eua.resize(days);
    return panel;
}

ForecastStream stream_with_errors(const data::HourlyPanel& panel, const std::string& name,
                                  double offset) {
    ForecastStream s;
    s.name = name;
    s.window = 56;
    s.first_day = panel.first_day;
    s.fc.resize(static_cast<std::size_t>(panel.days) * 24);
    for (int d = 0; d < panel.days; ++d)
        for (int h = 0; h < 24; ++h) s.fc[d * 24 + h] = panel.price_at(d, h) + offset;
    return s;
}

DailyErrors daily_from_values(const std::string& config, Date first, std::vector<double> values,
                              MaeMode mode = MaeMode::standard) {
    DailyErrors e;
    e.config = config;
    e.window = 56;
    e.first_day = first;
    e.mode = mode;
    e.mae_d = std::move(values);
    e.abs_err.assign(e.mae_d.size() * 24, 0.0);
    for (std::size_t d = 0; d < e.mae_d.size(); ++d)
        for (int h = 0; h < 24; ++h) e.abs_err[d * 24 + h] = e.mae_d[d];
    return e;
}

}  // namespace

TEST_CASE("a perfect forecast scores zero in both modes") {
    const auto panel = data::synth_panel(40, 2, data::Regime::stable);
    const auto fc = stream_with_errors(panel, "x", 0.0);
    for (auto mode : {MaeMode::standard, MaeMode::literal}) {
        const auto res = mae(panel, fc, mode);
        CHECK(res.aggregate == 0.0);
        for (double v : res.daily.mae_d) CHECK(v == 0.0);
        for (double v : res.daily.abs_err) CHECK(v == 0.0);
    }
}

TEST_CASE("a constant error of two scores two standard and root-two literal") {
    const auto panel = flat_panel(35, 40.0);
    const auto fc = stream_with_errors(panel, "x", 2.0);

    const auto std_res = mae(panel, fc, MaeMode::standard);
    CHECK(std_res.aggregate == 2.0);
    for (double v : std_res.daily.mae_d) CHECK(v == 2.0);

    const auto lit_res = mae(panel, fc, MaeMode::literal);
    CHECK(lit_res.aggregate == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    for (double v : lit_res.daily.mae_d) CHECK(v == std::sqrt(2.0));
}

TEST_CASE("one spike of 24 in an otherwise perfect day averages to one") {
    const auto panel = flat_panel(35, 40.0);
    auto fc = stream_with_errors(panel, "x", 0.0);
    fc.fc[5 * 24 + 13] += 24.0;
    const auto std_res = mae(panel, fc, MaeMode::standard);
    CHECK(std_res.daily.mae_d[5] == 1.0);
    const auto lit_res = mae(panel, fc, MaeMode::literal);
    CHECK(lit_res.daily.mae_d[5] == 1.0);
}

TEST_CASE("the standard aggregate is the exact global mean over day-hours") {
    const auto panel = data::synth_panel(60, 3, data::Regime::volatile_);
    Rng rng(4);
    auto fc = stream_with_errors(panel, "x", 0.0);
    for (auto& v : fc.fc) v += 3.0 * rng.normal();
    const auto res = mae(panel, fc, MaeMode::standard);

    double total = 0.0;
    for (double e : res.daily.abs_err) total += e;
    CHECK(res.aggregate == total / static_cast<double>(res.daily.abs_err.size()));

    double daily_mean = 0.0;
    for (double v : res.daily.mae_d) daily_mean += v;
    daily_mean /= static_cast<double>(res.daily.mae_d.size());
    CHECK(res.aggregate == doctest::Approx(daily_mean).epsilon(1e-12));
}

TEST_CASE("mae rejects misaligned or empty inputs") {
    const auto panel = data::synth_panel(40, 5, data::Regime::stable);
    auto fc = stream_with_errors(panel, "x", 1.0);
    fc.first_day = panel.first_day - 3;
    CHECK_THROWS_WITH_AS(mae(panel, fc), "misaligned calendars", std::invalid_argument);
    fc.first_day = panel.first_day + 10;  // now runs past the panel end
    CHECK_THROWS_WITH_AS(mae(panel, fc), "misaligned calendars", std::invalid_argument);
    fc.first_day = panel.first_day;
    fc.fc.clear();
    CHECK_THROWS_WITH_AS(mae(panel, fc), "empty forecast stream", std::invalid_argument);
}

TEST_CASE("an obviously worse stream is flagged with a negative mean delta") {
    const auto panel = data::synth_panel(150, 6, data::Regime::stable);
    Rng rng(7);
    auto a = stream_with_errors(panel, "a", 0.0);
    for (auto& v : a.fc) v += rng.normal();
    auto b = a;
    b.name = "b";
    for (auto& v : b.fc) v += 5.0;

    const auto res = cpa_test(mae(panel, a).daily, mae(panel, b).daily);
    CHECK(res.p_value < 0.01);
    CHECK(res.mean_delta < 0.0);
    CHECK(res.n == 149);
    CHECK(res.statistic > 0.0);
    CHECK(res.p_value == std::exp(-res.statistic / 2.0));
}

TEST_CASE("identical streams are degenerate and short series are rejected") {
    const auto panel = data::synth_panel(60, 8, data::Regime::stable);
    const auto a = stream_with_errors(panel, "a", 1.5);
    CHECK_THROWS_WITH_AS(cpa_test(mae(panel, a).daily, mae(panel, a).daily),
                         "degenerate loss differential", std::runtime_error);

    Rng rng(9);
    auto noisy = a;
    for (auto& v : noisy.fc) v += rng.normal();
    auto errs_a = mae(panel, a).daily;
    auto errs_n = mae(panel, noisy).daily;
    errs_a.mae_d.resize(30);
    errs_n.mae_d.resize(30);
    CHECK_THROWS_WITH_AS(cpa_test(errs_a, errs_n),
                         "predictive ability test needs at least 31 evaluated days",
                         std::invalid_argument);
    errs_a.mae_d.resize(31);
    errs_n.mae_d.resize(31);
    CHECK_NOTHROW(cpa_test(errs_a, errs_n));

    auto shifted = errs_n;
    shifted.first_day = shifted.first_day + 1;
    CHECK_THROWS_WITH_AS(cpa_test(errs_a, shifted), "misaligned calendars",
                         std::invalid_argument);
    auto other_mode = errs_n;
    other_mode.mode = MaeMode::literal;
    CHECK_THROWS_WITH_AS(cpa_test(errs_a, other_mode), "mae modes differ",
                         std::invalid_argument);
}

TEST_CASE("swapping the comparison flips the delta and keeps the statistic") {
    const auto panel = data::synth_panel(100, 10, data::Regime::volatile_);
    Rng rng(11);
    auto a = stream_with_errors(panel, "a", 0.0);
    auto b = stream_with_errors(panel, "b", 0.0);
    for (auto& v : a.fc) v += rng.normal();
    for (auto& v : b.fc) v += 1.5 * rng.normal();

    const auto ab = cpa_test(mae(panel, a).daily, mae(panel, b).daily);
    const auto ba = cpa_test(mae(panel, b).daily, mae(panel, a).daily);
    CHECK(std::fabs(ab.statistic - ba.statistic) <= 1e-9 * std::max(1.0, ab.statistic));
    CHECK(ab.mean_delta == -ba.mean_delta);
    CHECK(ab.p_value == doctest::Approx(ba.p_value).epsilon(1e-12));
}

TEST_CASE("rescaling both error series leaves the statistic unchanged") {
    const auto panel = data::synth_panel(90, 12, data::Regime::stable);
    Rng rng(13);
    auto a = stream_with_errors(panel, "a", 0.0);
    auto b = stream_with_errors(panel, "b", 0.0);
    for (auto& v : a.fc) v += rng.normal();
    for (auto& v : b.fc) v += 2.0 * rng.normal();
    auto ea = mae(panel, a).daily;
    auto eb = mae(panel, b).daily;
    const auto base = cpa_test(ea, eb);

    for (auto& v : ea.mae_d) v *= 7.5;
    for (auto& v : eb.mae_d) v *= 7.5;
    const auto scaled = cpa_test(ea, eb);
    CHECK(scaled.statistic ==
          doctest::Approx(base.statistic).epsilon(1e-9));
    CHECK(scaled.p_value == doctest::Approx(base.p_value).epsilon(1e-9));
}

TEST_CASE("the test holds its size on exchangeable noise") {
    Rng rng(2025);
    const int days = 100, reps = 2000;
    int rejections = 0;
    const Date first(2020, 1, 1);
    for (int rep = 0; rep < reps; ++rep) {
        std::vector<double> ma(days), mb(days);
        for (int d = 0; d < days; ++d) {
            // Daily MAE of iid hourly errors concentrates around its mean;
            // simulate the daily summary directly.
            double sa = 0.0, sb = 0.0;
            for (int h = 0; h < 24; ++h) {
                sa += std::fabs(rng.normal());
                sb += std::fabs(rng.normal());
            }
            ma[d] = sa / 24.0;
            mb[d] = sb / 24.0;
        }
        const auto res = cpa_test(daily_from_values("a", first, ma),
                                  daily_from_values("b", first, mb));
        if (res.p_value < 0.05) ++rejections;
    }
    const double rate = static_cast<double>(rejections) / reps;
    CHECK(rate > 0.02);
    CHECK(rate < 0.09);
}

TEST_CASE("regime report splits by phase and measures improvement") {
    RegimeSplit split;
    split.ranges = {{"early", Date(2021, 1, 1), Date(2021, 1, 31)},
                    {"late", Date(2021, 2, 1), Date(2021, 2, 28)}};
    const Date first(2021, 1, 22);  // 10 early days, 28 late days, 8 past both
    const int days = 46;

    const auto base = daily_from_values("base", first, std::vector<double>(days, 3.0));
    const auto better = daily_from_values("better", first, std::vector<double>(days, 2.0));
    // Starts after the early regime: present in late, absent in early.
    auto outside = daily_from_values("outside", Date(2021, 2, 20), std::vector<double>(20, 1.0));

    const auto report = regime_report({base, better, outside}, split, "base");
    REQUIRE(report.cells.size() == 9);  // 3 configs x (all + 2 regimes)

    const auto cell = [&](const std::string& config, const std::string& regime) {
        for (const auto& c : report.cells)
            if (c.config == config && c.regime == regime) return c;
        REQUIRE(false);
        return report.cells[0];
    };
    CHECK(cell("base", "all").mae == 3.0);
    CHECK(cell("base", "early").delta_vs_baseline == 0.0);
    CHECK(cell("base", "late").delta_vs_baseline == 0.0);
    CHECK(cell("better", "early").mae == 2.0);
    CHECK(cell("better", "early").delta_vs_baseline == 1.0);
    CHECK(cell("better", "late").delta_vs_baseline == 1.0);
    CHECK(cell("better", "all").delta_vs_baseline == 1.0);
    CHECK_FALSE(cell("outside", "early").present);
    CHECK_FALSE(cell("outside", "early").has_delta);
    CHECK(cell("outside", "late").present);
    CHECK(cell("outside", "late").has_delta);  // base also covers the late regime
    CHECK(cell("outside", "all").present);

    // Cells appear config-sorted, regimes in split order behind "all".
    CHECK(report.cells[0].config == "base");
    CHECK(report.cells[0].regime == "all");
    CHECK(report.cells[1].regime == "early");
    CHECK(report.cells[2].regime == "late");
    CHECK(report.cells[3].config == "better");

    CHECK_THROWS_WITH_AS(regime_report({base}, split, "nope"), "baseline not found: nope",
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(regime_report({base, base}, split, "base"),
                         "duplicate config in report: base", std::invalid_argument);
    auto lit = base;
    lit.mode = MaeMode::literal;
    CHECK_THROWS_WITH_AS(regime_report({base, lit}, split, "base"), "mixed mae modes in report",
                         std::invalid_argument);
}

TEST_CASE("regime splits validate ordering and shape") {
    auto split = RegimeSplit::defaults();
    CHECK_NOTHROW(split.validate());
    REQUIRE(split.ranges.size() == 3);
    CHECK(split.ranges[0].name == "2019-2020");
    CHECK(split.ranges[2].last == Date(2024, 12, 31));

    RegimeSplit empty;
    CHECK_THROWS_WITH_AS(empty.validate(), "regime split is empty", std::invalid_argument);
    RegimeSplit reversed{{{"r", Date(2021, 5, 1), Date(2021, 4, 1)}}};
    CHECK_THROWS_WITH_AS(reversed.validate(), "regime range reversed: r", std::invalid_argument);
    RegimeSplit overlapping{{{"a", Date(2021, 1, 1), Date(2021, 6, 30)},
                             {"b", Date(2021, 6, 30), Date(2021, 12, 31)}}};
    CHECK_THROWS_WITH_AS(overlapping.validate(), "regime ranges must be ordered and disjoint",
                         std::invalid_argument);
}

TEST_CASE("the pairwise matrix keeps degenerate pairs as NA rows") {
    const auto panel = data::synth_panel(80, 14, data::Regime::stable);
    Rng rng(15);
    auto a = stream_with_errors(panel, "a", 0.0);
    auto b = stream_with_errors(panel, "b", 0.0);
    for (auto& v : a.fc) v += rng.normal();
    for (auto& v : b.fc) v += 2.0 * rng.normal();
    auto c = a;
    c.name = "c";  // identical errors to a -> degenerate pair (a, c)

    const auto cells =
        cpa_matrix({mae(panel, b).daily, mae(panel, a).daily, mae(panel, c).daily});
    REQUIRE(cells.size() == 3);
    CHECK(cells[0].config_a == "a");
    CHECK(cells[0].config_b == "b");
    CHECK(cells[0].ok);
    CHECK(cells[1].config_a == "a");
    CHECK(cells[1].config_b == "c");
    CHECK_FALSE(cells[1].ok);
    CHECK(cells[2].config_a == "b");
    CHECK(cells[2].config_b == "c");
    CHECK(cells[2].ok);
}

TEST_CASE("report files are written with exact content") {
    const auto dir = std::filesystem::path("eval_test_tmp");
    std::filesystem::remove_all(dir);

    EvalReport report;
    report.baseline = "base";
    report.cells = {{"base", 56, "all", true, 3.0, true, 0.0},
                    {"other", 56, "all", false, 0.0, false, 0.0}};
    const auto mae_path = (dir / "mae_summary.csv").string();
    write_mae_summary(report, mae_path);
    std::ifstream in(mae_path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(content ==
          "config,window,regime,mae,delta_vs_baseline\n"
          "base,56,all,3,0\n"
          "other,56,all,NA,NA\n");

    std::vector<CpaCell> cells = {{"a", "b", true, 1.5, 0.25}, {"a", "c", false, 0.0, 0.0}};
    const auto cpa_path = (dir / "cpa_matrix.csv").string();
    write_cpa_matrix(cells, cpa_path);
    std::ifstream in2(cpa_path);
    std::string content2((std::istreambuf_iterator<char>(in2)), std::istreambuf_iterator<char>());
    CHECK(content2 ==
          "config_a,config_b,statistic,p_value\n"
          "a,b,1.5,0.25\n"
          "a,c,NA,NA\n");

    std::vector<backtest::CrystalBallResult::Bin> bins = {{vst::Family::asinh, 0.4, 100},
                                                          {vst::Family::identity, 0.0, 44}};
    const auto hist_path = (dir / "param_histogram.csv").string();
    write_param_histogram(bins, hist_path);
    std::ifstream in3(hist_path);
    std::string content3((std::istreambuf_iterator<char>(in3)), std::istreambuf_iterator<char>());
    CHECK(content3 ==
          "family,param,count\n"
          "asinh,0.4,100\n"
          "identity,0,44\n");

    std::filesystem::remove_all(dir);
}

TEST_CASE("mode names round-trip") {
    CHECK(mae_mode_from_name("standard") == MaeMode::standard);
    CHECK(mae_mode_from_name("literal") == MaeMode::literal);
    CHECK(mae_mode_name(MaeMode::standard) == std::string("standard"));
    CHECK(mae_mode_name(MaeMode::literal) == std::string("literal"));
    CHECK_THROWS_AS(mae_mode_from_name("rmse"), std::invalid_argument);
}
