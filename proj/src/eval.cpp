#include "epfvst/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace epfvst::eval {

namespace {

std::string format_value(double v) {
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("cannot format value");
    return std::string(buf, end);
}

std::ofstream open_csv(const std::string& path) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

void close_csv(std::ofstream& out, const std::string& path) {
    if (!out.flush()) throw std::runtime_error("write failed: " + path);
}

/// Regime-cell aggregate from daily values: plain mean in standard mode, root
/// mean square in literal mode (whose daily values are themselves roots).
double aggregate_daily(const std::vector<double>& mae_d, const std::vector<int>& day_idx,
                       MaeMode mode) {
    double sum = 0.0;
    for (int d : day_idx) {
        const double v = mae_d[static_cast<std::size_t>(d)];
        sum += mode == MaeMode::standard ? v : v * v;
    }
    const double mean = sum / static_cast<double>(day_idx.size());
    return mode == MaeMode::standard ? mean : std::sqrt(mean);
}

}  // namespace

const char* mae_mode_name(MaeMode m) { return m == MaeMode::standard ? "standard" : "literal"; }

MaeMode mae_mode_from_name(const std::string& name) {
    if (name == "standard") return MaeMode::standard;
    if (name == "literal") return MaeMode::literal;
    throw std::invalid_argument("unknown mae mode: " + name);
}

MaeResult mae(const data::HourlyPanel& actual, const backtest::ForecastStream& fc, MaeMode mode) {
    const int days = fc.days();
    if (days < 1) throw std::invalid_argument("empty forecast stream");
    const int offset = fc.first_day - actual.first_day;
    if (offset < 0 || offset + days > actual.days)
        throw std::invalid_argument("misaligned calendars");

    MaeResult res;
    res.daily.config = fc.name;
    res.daily.window = fc.window;
    res.daily.first_day = fc.first_day;
    res.daily.mode = mode;
    res.daily.abs_err.resize(static_cast<std::size_t>(days) * 24);
    res.daily.mae_d.resize(days);

    double total = 0.0;
    for (int d = 0; d < days; ++d) {
        double day_sum = 0.0;
        for (int h = 0; h < 24; ++h) {
            const double e = std::fabs(fc.at(d, h) - actual.price_at(offset + d, h));
            res.daily.abs_err[static_cast<std::size_t>(d) * 24 + h] = e;
            day_sum += e;
            total += e;
        }
        const double day_mean = day_sum / 24.0;
        res.daily.mae_d[d] = mode == MaeMode::standard ? day_mean : std::sqrt(day_mean);
    }
    if (mode == MaeMode::standard) {
        res.aggregate = total / (static_cast<double>(days) * 24.0);
    } else {
        // Root mean square of the daily roots: sqrt of the mean daily mean.
        double mean_sq = 0.0;
        for (int d = 0; d < days; ++d) mean_sq += res.daily.mae_d[d] * res.daily.mae_d[d];
        res.aggregate = std::sqrt(mean_sq / static_cast<double>(days));
    }
    return res;
}

CpaResult cpa_test(const DailyErrors& a, const DailyErrors& b) {
    if (a.first_day != b.first_day || a.days() != b.days())
        throw std::invalid_argument("misaligned calendars");
    if (a.mode != b.mode) throw std::invalid_argument("mae modes differ");
    const int days = a.days();
    const int n = days - 1;
    if (n < 30)
        throw std::invalid_argument(
            "predictive ability test needs at least 31 evaluated days");

    std::vector<double> delta(days);
    bool any = false;
    double delta_sum = 0.0;
    for (int d = 0; d < days; ++d) {
        delta[d] = a.mae_d[d] - b.mae_d[d];
        delta_sum += delta[d];
        any = any || delta[d] != 0.0;
    }
    if (!any) throw std::runtime_error("degenerate loss differential");

    // Moment vector r_d = (1, Delta_d) * Delta_{d+1} and its second moment.
    double r0 = 0.0, r1 = 0.0, o00 = 0.0, o01 = 0.0, o11 = 0.0;
    for (int d = 0; d < n; ++d) {
        const double u = delta[d + 1];
        const double v = delta[d] * delta[d + 1];
        r0 += u;
        r1 += v;
        o00 += u * u;
        o01 += u * v;
        o11 += v * v;
    }
    const double dn = static_cast<double>(n);
    r0 /= dn;
    r1 /= dn;
    o00 /= dn;
    o01 /= dn;
    o11 /= dn;

    const double det = o00 * o11 - o01 * o01;
    const double scale = std::max(std::fabs(o00 * o11), o01 * o01);
    if (!(scale > 0.0) || !(det > 1e-12 * scale))
        throw std::runtime_error("degenerate loss differential");

    CpaResult res;
    res.n = n;
    res.mean_delta = delta_sum / static_cast<double>(days);
    const double quad = o11 * r0 * r0 - 2.0 * o01 * r0 * r1 + o00 * r1 * r1;
    res.statistic = std::max(dn * quad / det, 0.0);
    res.p_value = std::exp(-res.statistic / 2.0);  // chi-squared survival, 2 dof
    return res;
}

RegimeSplit RegimeSplit::defaults() {
    return {{{"2019-2020", Date(2019, 1, 1), Date(2020, 12, 31)},
             {"2021-2022", Date(2021, 1, 1), Date(2022, 12, 31)},
             {"2023-2024", Date(2023, 1, 1), Date(2024, 12, 31)}}};
}

void RegimeSplit::validate() const {
    if (ranges.empty()) throw std::invalid_argument("regime split is empty");
    for (const auto& r : ranges) {
        if (r.name.empty()) throw std::invalid_argument("regime range has no name");
        if (r.last < r.first) throw std::invalid_argument("regime range reversed: " + r.name);
    }
    for (std::size_t i = 1; i < ranges.size(); ++i)
        if (!(ranges[i - 1].last < ranges[i].first))
            throw std::invalid_argument("regime ranges must be ordered and disjoint");
}

EvalReport regime_report(const std::vector<DailyErrors>& results, const RegimeSplit& split,
                         const std::string& baseline) {
    split.validate();
    if (results.empty()) throw std::invalid_argument("no results to report");
    for (const auto& r : results)
        if (r.mode != results.front().mode)
            throw std::invalid_argument("mixed mae modes in report");

    std::vector<const DailyErrors*> sorted;
    for (const auto& r : results) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const DailyErrors* x, const DailyErrors* y) { return x->config < y->config; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i]->config == sorted[i - 1]->config)
            throw std::invalid_argument("duplicate config in report: " + sorted[i]->config);

    const DailyErrors* base = nullptr;
    for (const auto* r : sorted)
        if (r->config == baseline) base = r;
    if (base == nullptr) throw std::invalid_argument("baseline not found: " + baseline);

    // Regime "all" spans every evaluated day of a config; the named regimes
    // intersect the config's calendar with their date range.
    const auto day_indices = [](const DailyErrors& r, const RegimeSplit::Range* range) {
        std::vector<int> idx;
        for (int d = 0; d < r.days(); ++d) {
            const Date day = r.first_day + d;
            if (range == nullptr || (range->first <= day && day <= range->last)) idx.push_back(d);
        }
        return idx;
    };

    std::vector<const RegimeSplit::Range*> regimes{nullptr};
    for (const auto& r : split.ranges) regimes.push_back(&r);

    EvalReport report;
    report.baseline = baseline;
    const MaeMode mode = results.front().mode;
    for (const auto* cfg : sorted) {
        for (const auto* range : regimes) {
            EvalCell cell;
            cell.config = cfg->config;
            cell.window = cfg->window;
            cell.regime = range == nullptr ? "all" : range->name;
            const auto idx = day_indices(*cfg, range);
            cell.present = !idx.empty();
            if (cell.present) cell.mae = aggregate_daily(cfg->mae_d, idx, mode);
            const auto base_idx = day_indices(*base, range);
            if (cell.present && !base_idx.empty()) {
                cell.has_delta = true;
                cell.delta_vs_baseline = aggregate_daily(base->mae_d, base_idx, mode) - cell.mae;
            }
            report.cells.push_back(std::move(cell));
        }
    }
    return report;
}

std::vector<CpaCell> cpa_matrix(const std::vector<DailyErrors>& results) {
    std::vector<const DailyErrors*> sorted;
    for (const auto& r : results) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const DailyErrors* x, const DailyErrors* y) { return x->config < y->config; });

    std::vector<CpaCell> cells;
    for (std::size_t i = 0; i < sorted.size(); ++i)
        for (std::size_t j = i + 1; j < sorted.size(); ++j) {
            CpaCell cell;
            cell.config_a = sorted[i]->config;
            cell.config_b = sorted[j]->config;
            try {
                const auto res = cpa_test(*sorted[i], *sorted[j]);
                cell.ok = true;
                cell.statistic = res.statistic;
                cell.p_value = res.p_value;
            } catch (const std::runtime_error&) {
                cell.ok = false;  // degenerate pair stays in the matrix as NA
            }
            cells.push_back(std::move(cell));
        }
    return cells;
}

void write_mae_summary(const EvalReport& report, const std::string& path) {
    auto out = open_csv(path);
    out << "config,window,regime,mae,delta_vs_baseline\n";
    for (const auto& c : report.cells) {
        out << c.config << ',' << c.window << ',' << c.regime << ','
            << (c.present ? format_value(c.mae) : "NA") << ','
            << (c.has_delta ? format_value(c.delta_vs_baseline) : "NA") << '\n';
    }
    close_csv(out, path);
}

void write_cpa_matrix(const std::vector<CpaCell>& cells, const std::string& path) {
    auto out = open_csv(path);
    out << "config_a,config_b,statistic,p_value\n";
    for (const auto& c : cells) {
        out << c.config_a << ',' << c.config_b << ',';
        if (c.ok)
            out << format_value(c.statistic) << ',' << format_value(c.p_value) << '\n';
        else
            out << "NA,NA\n";
    }
    close_csv(out, path);
}

void write_param_histogram(const std::vector<backtest::CrystalBallResult::Bin>& bins,
                           const std::string& path) {
    auto out = open_csv(path);
    out << "family,param,count\n";
    for (const auto& b : bins)
        out << vst::family_name(b.family) << ',' << format_value(b.param) << ',' << b.count
            << '\n';
    close_csv(out, path);
}

}  // namespace epfvst::eval
