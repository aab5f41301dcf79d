#include "epfvst/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "epfvst/rng.hpp"

namespace epfvst::data {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kTwoPi = 6.283185307179586476925286766559;

std::string join_rows(const std::vector<std::size_t>& rows) {
    std::string out;
    const std::size_t shown = std::min<std::size_t>(rows.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) {
        if (i) out += ", ";
        out += std::to_string(rows[i]);
    }
    if (rows.size() > shown) out += ", ...";
    return out;
}

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
    return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            cells.push_back(trim(std::string_view(line).substr(start)));
            break;
        }
        cells.push_back(trim(std::string_view(line).substr(start, pos - start)));
        start = pos + 1;
    }
    return cells;
}

bool parse_number(const std::string& cell, double& out) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && ptr == end && std::isfinite(out);
}

// "YYYY-MM-DDTHH:00[:00]" with 'T' or ' ' as the separator; hourly resolution.
bool parse_timestamp(const std::string& cell, Date& day, int& hour) {
    if (cell.size() < 16) return false;
    if (cell[10] != 'T' && cell[10] != ' ') return false;
    try {
        day = Date::parse(std::string_view(cell).substr(0, 10));
    } catch (const std::exception&) {
        return false;
    }
    const std::string hh = cell.substr(11, 2);
    int h = 0;
    auto [ptr, ec] = std::from_chars(hh.data(), hh.data() + 2, h);
    if (ec != std::errc{} || ptr != hh.data() + 2 || h < 0 || h > 23) return false;
    const std::string rest = cell.substr(13);
    if (rest != ":00" && rest != ":00:00") return false;
    hour = h;
    return true;
}

// "+HH:MM", "-HH:MM" or "Z".
bool valid_offset(const std::string& cell) {
    if (cell == "Z") return true;
    if (cell.size() != 6 || (cell[0] != '+' && cell[0] != '-') || cell[3] != ':') return false;
    return std::isdigit(static_cast<unsigned char>(cell[1])) &&
           std::isdigit(static_cast<unsigned char>(cell[2])) &&
           std::isdigit(static_cast<unsigned char>(cell[4])) &&
           std::isdigit(static_cast<unsigned char>(cell[5]));
}

const char* field_label(FieldId f) {
    switch (f) {
        case FieldId::price: return "price";
        case FieldId::load_fc: return "load_fc";
        case FieldId::res_fc: return "res_fc";
        case FieldId::coal: return "coal";
        case FieldId::gas: return "gas";
        case FieldId::oil: return "oil";
        case FieldId::eua: return "eua";
    }
    return "?";
}

std::string format_value(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

struct HourlyField {
    std::vector<double>* values;
    const char* name;
};

// Repairs one hourly series in place. Gap runs shorter than a day are filled
// by linear interpolation between the adjacent present hours; full-day
// aligned runs are deferred to day-level repair.
void repair_hourly_field(HourlyField f, int days, std::vector<RepairAction>& log, Date first_day) {
    std::vector<double>& v = *f.values;
    const int n = days * 24;
    std::vector<int> day_repairs;

    int i = 0;
    while (i < n) {
        if (!std::isnan(v[i])) {
            ++i;
            continue;
        }
        int j = i;
        while (j < n && std::isnan(v[j])) ++j;
        const int len = j - i;
        if (len >= 24) {
            if (len == 24 && i % 24 == 0) {
                day_repairs.push_back(i / 24);
                i = j;
                continue;
            }
            throw std::runtime_error("irreparable gap: " + std::to_string(len) +
                                     " contiguous missing hours of " + f.name + " starting " +
                                     (first_day + i / 24).to_string());
        }
        const bool has_prev = i > 0;
        const bool has_next = j < n;
        if (!has_prev && !has_next)
            throw std::runtime_error(std::string("series of ") + f.name + " entirely missing");
        for (int k = i; k < j; ++k) {
            double filled;
            if (has_prev && has_next) {
                const double t = static_cast<double>(k - i + 1) / static_cast<double>(len + 1);
                filled = v[i - 1] + t * (v[j] - v[i - 1]);
            } else {
                filled = has_prev ? v[i - 1] : v[j];
            }
            v[k] = filled;
            log.push_back(
                {first_day + k / 24, k % 24, f.name, "imputed from adjacent hours"});
        }
        i = j;
    }

    for (int d : day_repairs) {
        if (d == 0 || d == days - 1)
            throw std::runtime_error(std::string("irreparable gap: missing boundary day of ") +
                                     f.name + " on " + (first_day + d).to_string());
        for (int h = 0; h < 24; ++h) {
            const double prev = v[(d - 1) * 24 + h];
            const double next = v[(d + 1) * 24 + h];
            if (std::isnan(prev) || std::isnan(next))
                throw std::runtime_error("irreparable gap: consecutive missing days of " +
                                         std::string(f.name) + " near " +
                                         (first_day + d).to_string());
            v[d * 24 + h] = 0.5 * (prev + next);
        }
        log.push_back({first_day + d, -1, f.name, "missing day imputed from neighbor days"});
    }
}

void fill_daily_field(std::vector<double>& v, const char* name, std::vector<RepairAction>& log,
                      Date first_day) {
    int first_finite = -1;
    for (std::size_t d = 0; d < v.size(); ++d) {
        if (!std::isnan(v[d])) {
            first_finite = static_cast<int>(d);
            break;
        }
    }
    if (first_finite < 0)
        throw std::runtime_error(std::string("no settlements at all for ") + name);
    for (int d = 0; d < first_finite; ++d) {
        v[d] = v[first_finite];
        log.push_back({first_day + d, -1, name, "backfilled from first settlement"});
    }
    for (std::size_t d = first_finite + 1; d < v.size(); ++d) {
        if (std::isnan(v[d])) {
            v[d] = v[d - 1];
            log.push_back({first_day + static_cast<int>(d), -1, name,
                           "forward-filled from last settlement"});
        }
    }
}

}  // namespace

std::string RepairAction::to_string() const {
    std::string ts = day.to_string();
    if (hour >= 0) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "T%02d:00", hour);
        ts += buf;
    }
    return ts + " " + field + ": " + action;
}

bool HourlyPanel::has_gaps() const {
    const auto any_nan = [](const std::vector<double>& v) {
        return std::any_of(v.begin(), v.end(), [](double x) { return std::isnan(x); });
    };
    return any_nan(price) || any_nan(load_fc) || any_nan(res_fc) || any_nan(coal) ||
           any_nan(gas) || any_nan(oil) || any_nan(eua);
}

void HourlyPanel::validate() const {
    if (days < 1) throw std::runtime_error("panel has no days");
    const std::size_t nh = static_cast<std::size_t>(days) * 24;
    const std::size_t nd = static_cast<std::size_t>(days);
    if (price.size() != nh || load_fc.size() != nh || res_fc.size() != nh)
        throw std::runtime_error("panel hourly series have wrong length");
    if (coal.size() != nd || gas.size() != nd || oil.size() != nd || eua.size() != nd)
        throw std::runtime_error("panel daily series have wrong length");
    const auto all_finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!all_finite(price) || !all_finite(load_fc) || !all_finite(res_fc) ||
        !all_finite(coal) || !all_finite(gas) || !all_finite(oil) || !all_finite(eua))
        throw std::runtime_error("panel contains missing or non-finite values");
}

IngestResult repair_calendar(HourlyPanel panel) {
    std::vector<RepairAction> log;
    repair_hourly_field({&panel.price, "price"}, panel.days, log, panel.first_day);
    repair_hourly_field({&panel.load_fc, "load_fc"}, panel.days, log, panel.first_day);
    repair_hourly_field({&panel.res_fc, "res_fc"}, panel.days, log, panel.first_day);
    fill_daily_field(panel.coal, "coal", log, panel.first_day);
    fill_daily_field(panel.gas, "gas", log, panel.first_day);
    fill_daily_field(panel.oil, "oil", log, panel.first_day);
    fill_daily_field(panel.eua, "eua", log, panel.first_day);
    panel.validate();
    return {std::move(panel), std::move(log)};
}

IngestResult ingest_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
    const std::vector<std::string> header = split_csv_line(line);
    const auto col = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw std::runtime_error("missing column: " + name);
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_ts = col(schema.timestamp);
    const std::size_t c_off = col(schema.utc_offset);
    const std::pair<std::size_t, FieldId> value_cols[] = {
        {col(schema.price), FieldId::price},   {col(schema.load_fc), FieldId::load_fc},
        {col(schema.res_fc), FieldId::res_fc}, {col(schema.coal), FieldId::coal},
        {col(schema.gas), FieldId::gas},       {col(schema.oil), FieldId::oil},
        {col(schema.eua), FieldId::eua},
    };

    std::vector<RawRecord> records;
    std::vector<std::size_t> bad_rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        bool ok = cells.size() >= header.size();
        Date day;
        int hour = 0;
        if (ok) ok = parse_timestamp(cells[c_ts], day, hour);
        if (ok) ok = valid_offset(cells[c_off]);
        if (ok) {
            for (const auto& [idx, field] : value_cols) {
                const std::string& cell = cells[idx];
                if (cell.empty()) continue;  // missing observation, repairable
                double value = 0.0;
                if (!parse_number(cell, value)) {
                    ok = false;
                    break;
                }
                records.push_back({day, hour, field, value});
            }
        }
        if (!ok) bad_rows.push_back(line_no);
    }
    if (!bad_rows.empty())
        throw std::runtime_error("unparseable rows: " + join_rows(bad_rows));
    if (records.empty()) throw std::runtime_error("no data rows in " + path);

    int min_serial = records.front().day.serial();
    int max_serial = min_serial;
    for (const RawRecord& r : records) {
        min_serial = std::min(min_serial, r.day.serial());
        max_serial = std::max(max_serial, r.day.serial());
    }

    int days = max_serial - min_serial + 1;
    const std::size_t nh = static_cast<std::size_t>(days) * 24;
    std::vector<double> sum[3]{std::vector<double>(nh, 0.0), std::vector<double>(nh, 0.0),
                               std::vector<double>(nh, 0.0)};
    std::vector<int> cnt[3]{std::vector<int>(nh, 0), std::vector<int>(nh, 0),
                            std::vector<int>(nh, 0)};
    std::vector<double> daily[4]{
        std::vector<double>(days, kNaN), std::vector<double>(days, kNaN),
        std::vector<double>(days, kNaN), std::vector<double>(days, kNaN)};
    std::vector<RepairAction> log;

    for (const RawRecord& r : records) {
        const int d = r.day.serial() - min_serial;
        const int fi = static_cast<int>(r.field);
        if (fi <= static_cast<int>(FieldId::res_fc)) {
            sum[fi][d * 24 + r.hour] += r.value;
            cnt[fi][d * 24 + r.hour] += 1;
        } else {
            double& slot = daily[fi - 3][d];
            if (std::isnan(slot)) {
                slot = r.value;
            } else if (slot != r.value) {
                log.push_back({r.day, -1, field_label(r.field),
                               "conflicting settlement " + format_value(r.value) +
                                   " ignored, kept " + format_value(slot)});
            }
        }
    }

    // Trim leading/trailing days with no hourly observations at all.
    const auto day_has_data = [&](int d) {
        for (int f = 0; f < 3; ++f)
            for (int h = 0; h < 24; ++h)
                if (cnt[f][d * 24 + h] > 0) return true;
        return false;
    };
    int first_d = 0, last_d = days - 1;
    while (first_d <= last_d && !day_has_data(first_d)) ++first_d;
    while (last_d >= first_d && !day_has_data(last_d)) --last_d;
    if (first_d > last_d) throw std::runtime_error("no hourly observations in " + path);

    HourlyPanel panel;
    panel.first_day = Date::from_serial(min_serial + first_d);
    panel.days = last_d - first_d + 1;
    const std::size_t out_nh = static_cast<std::size_t>(panel.days) * 24;
    std::vector<double>* hourly_out[3] = {&panel.price, &panel.load_fc, &panel.res_fc};
    for (int f = 0; f < 3; ++f) {
        hourly_out[f]->assign(out_nh, kNaN);
        for (int d = 0; d < panel.days; ++d) {
            for (int h = 0; h < 24; ++h) {
                const std::size_t src = static_cast<std::size_t>(d + first_d) * 24 + h;
                const int c = cnt[f][src];
                if (c > 0) (*hourly_out[f])[d * 24 + h] = sum[f][src] / c;
                if (c > 1)
                    log.push_back({panel.first_day + d, h,
                                   field_label(static_cast<FieldId>(f)),
                                   "duplicate timestamps averaged (" + std::to_string(c) +
                                       " values)"});
            }
        }
    }
    std::vector<double>* daily_out[4] = {&panel.coal, &panel.gas, &panel.oil, &panel.eua};
    for (int f = 0; f < 4; ++f) {
        daily_out[f]->assign(daily[f].begin() + first_d, daily[f].begin() + last_d + 1);
    }

    IngestResult repaired = repair_calendar(std::move(panel));
    log.insert(log.end(), repaired.log.begin(), repaired.log.end());
    return {std::move(repaired.panel), std::move(log)};
}

void write_panel_csv(const HourlyPanel& panel, const std::string& path) {
    panel.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "timestamp,utc_offset,price,load_fc,res_fc,coal,gas,oil,eua\n";
    for (int d = 0; d < panel.days; ++d) {
        const std::string date = panel.day(d).to_string();
        for (int h = 0; h < 24; ++h) {
            char ts[16];
            std::snprintf(ts, sizeof(ts), "T%02d:00", h);
            out << date << ts << ",+01:00," << format_value(panel.price_at(d, h)) << ','
                << format_value(panel.load_at(d, h)) << ',' << format_value(panel.res_at(d, h))
                << ',' << format_value(panel.coal[d]) << ',' << format_value(panel.gas[d])
                << ',' << format_value(panel.oil[d]) << ',' << format_value(panel.eua[d])
                << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

Regime regime_from_name(const std::string& name) {
    if (name == "stable") return Regime::stable;
    if (name == "volatile") return Regime::volatile_;
    if (name == "crisis") return Regime::crisis;
    throw std::invalid_argument("unknown regime: " + name);
}

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::stable: return "stable";
        case Regime::volatile_: return "volatile";
        case Regime::crisis: return "crisis";
    }
    return "?";
}

HourlyPanel synth_panel(int n_days, std::uint64_t seed, Regime regime, Date start) {
    if (n_days < 28) throw std::invalid_argument("synth_panel needs n_days >= 28");

    Rng rng(splitmix64(seed));

    HourlyPanel p;
    p.first_day = start;
    p.days = n_days;
    const std::size_t nh = static_cast<std::size_t>(n_days) * 24;
    p.price.resize(nh);
    p.load_fc.resize(nh);
    p.res_fc.resize(nh);
    p.coal.resize(n_days);
    p.gas.resize(n_days);
    p.oil.resize(n_days);
    p.eua.resize(n_days);

    // Fixed intraday shapes.
    double daily_shape[24], load_shape[24], solar_bell[24];
    for (int h = 0; h < 24; ++h) {
        daily_shape[h] = 1.1 * std::exp(-(h - 8.5) * (h - 8.5) / 10.0) +
                         1.5 * std::exp(-(h - 18.5) * (h - 18.5) / 14.0) -
                         1.2 * std::exp(-(h - 3.5) * (h - 3.5) / 16.0);
        load_shape[h] = 0.55 * std::exp(-(h - 9.0) * (h - 9.0) / 30.0) +
                        0.50 * std::exp(-(h - 19.0) * (h - 19.0) / 24.0) -
                        0.60 * std::exp(-(h - 3.5) * (h - 3.5) / 18.0);
        solar_bell[h] = std::exp(-(h - 13.0) * (h - 13.0) / 14.0);
    }
    const double weekly[8] = {0, 2.0, 2.5, 2.5, 2.0, 1.0, -5.0, -8.0};  // index 1..7

    double coal = 80.0, gas = 25.0, oil = 70.0, eua = 25.0;
    double wind_level = 8000.0;
    double ar = 0.0;
    double spike_carry = 0.0;

    for (int d = 0; d < n_days; ++d) {
        const Date date = start + d;
        const int wd = date.weekday();
        const int doy_serial = date.serial() - Date(date.year(), 1, 1).serial();
        const double annual = std::cos(kTwoPi * (doy_serial - 15.0) / 365.25);
        const double frac = static_cast<double>(d) / static_cast<double>(n_days);

        // Regime profile: per-hour spike intensity, spike magnitude scale,
        // AR(1) innovation scale, gas multiplier. The volatile profile keeps
        // the first half of the sample quiet and ramps up afterwards.
        double lambda_spike = 0.0, spike_mean = 0.0, ar_sigma = 0.0, gas_mult = 1.0;
        switch (regime) {
            case Regime::stable:
                lambda_spike = 0.002;
                spike_mean = 60.0;
                ar_sigma = 5.0;
                gas_mult = 1.0;
                break;
            case Regime::volatile_:
                if (frac < 0.5) {
                    lambda_spike = 0.004;
                    spike_mean = 80.0;
                    ar_sigma = 7.0;
                    gas_mult = 1.0;
                } else {
                    lambda_spike = 0.020;
                    spike_mean = 150.0;
                    ar_sigma = 16.0;
                    gas_mult = std::min(3.0, 1.0 + 20.0 * (frac - 0.5));
                }
                break;
            case Regime::crisis:
                lambda_spike = 0.030;
                spike_mean = 180.0;
                ar_sigma = 20.0;
                gas_mult = 3.0;
                break;
        }

        coal = std::clamp(coal * std::exp(0.010 * rng.normal() - 0.00005), 20.0, 400.0);
        gas = std::clamp(gas * std::exp(0.020 * rng.normal() - 0.0002), 5.0, 120.0);
        oil = std::clamp(oil * std::exp(0.012 * rng.normal() - 0.00007), 15.0, 250.0);
        eua = std::clamp(eua * std::exp(0.015 * rng.normal() - 0.0001), 4.0, 150.0);
        p.coal[d] = coal;
        p.gas[d] = gas * gas_mult;
        p.oil[d] = oil;
        p.eua[d] = eua;

        wind_level =
            std::clamp(0.75 * wind_level + 0.25 * 8000.0 + 2500.0 * rng.normal(), 500.0, 25000.0);
        const double solar_season = 3500.0 * (1.0 + 0.8 * std::cos(kTwoPi *
                                                                  (doy_serial - 172.0) / 365.25));

        for (int h = 0; h < 24; ++h) {
            const double load = 45000.0 + 7000.0 * annual + 9000.0 * load_shape[h] +
                                (wd >= 6 ? -6000.0 : 0.0) + 700.0 * rng.normal();
            const double res = std::max(
                0.0, wind_level * (1.0 + 0.15 * std::sin(kTwoPi * (h - 3.0) / 24.0)) +
                         solar_season * solar_bell[h] + 400.0 * rng.normal());
            ar = 0.97 * ar + ar_sigma * rng.normal();

            double spike = 0.0;
            if (rng.bernoulli(lambda_spike)) {
                double mag = rng.exponential(spike_mean);
                if (rng.bernoulli(0.3)) mag *= 1.0 + rng.exponential(1.0);  // heavy tail
                const double sign = rng.bernoulli(0.25) ? -1.0 : 1.0;
                spike = sign * mag;
            }
            const double price = 40.0 + 4.0 * annual + 6.0 * daily_shape[h] + weekly[wd] +
                                 10.0 * (load - 45000.0) / 8000.0 -
                                 8.0 * (res - 9000.0) / 6000.0 +
                                 14.0 * (p.gas[d] / 25.0 - 1.0) + ar + spike + spike_carry;
            spike_carry = 0.4 * spike;
            p.price[d * 24 + h] = price;
            p.load_fc[d * 24 + h] = load;
            p.res_fc[d * 24 + h] = res;
        }
    }

    p.validate();
    return p;
}

}  // namespace epfvst::data
