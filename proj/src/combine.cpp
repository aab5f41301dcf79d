#include "epfvst/combine.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <utility>

namespace epfvst::combine {

namespace {

using backtest::ForecastStream;

/// Mean absolute error of the equal-weight average of `members` for `hour`
/// over pool days [lo, hi). Days ascending, members ascending, one division
/// at the end; selection compares these sums, so the order is part of the
/// tie-break contract.
double subset_mae(const CombinePool& pool, const std::vector<int>& members, int hour, int lo,
                  int hi) {
    const double k = static_cast<double>(members.size());
    double sum = 0.0;
    for (int d = lo; d < hi; ++d) {
        double m = 0.0;
        for (int s : members) m += pool.fc(s, d, hour);
        sum += std::fabs(m / k - pool.act(d, hour));
    }
    return sum / static_cast<double>(hi - lo);
}

/// All index subsets of size 1..cap, sizes ascending, lexicographic within a
/// size. With name-sorted streams this is exactly the tie-break priority
/// order: the first strict improvement wins.
std::vector<std::vector<int>> enumerate_subsets(int n, int cap) {
    std::vector<std::vector<int>> out;
    for (int a = 0; a < n; ++a) out.push_back({a});
    if (cap >= 2)
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b) out.push_back({a, b});
    if (cap >= 3)
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b)
                for (int c = b + 1; c < n; ++c) out.push_back({a, b, c});
    for (int size = 4; size <= cap && size <= n; ++size) {
        // General case for experimentation; sizes above 3 are rarely enabled.
        std::vector<int> idx(size);
        for (int i = 0; i < size; ++i) idx[i] = i;
        while (true) {
            out.push_back(idx);
            int i = size - 1;
            while (i >= 0 && idx[i] == n - size + i) --i;
            if (i < 0) break;
            ++idx[i];
            for (int j = i + 1; j < size; ++j) idx[j] = idx[j - 1] + 1;
        }
    }
    return out;
}

const std::vector<int>* best_subset(const CombinePool& pool,
                                    const std::vector<std::vector<int>>& subsets, int hour, int lo,
                                    int hi) {
    const std::vector<int>* best = nullptr;
    double best_mae = std::numeric_limits<double>::infinity();
    for (const auto& s : subsets) {
        const double mae = subset_mae(pool, s, hour, lo, hi);
        if (mae < best_mae) {
            best_mae = mae;
            best = &s;
        }
    }
    return best;
}

std::vector<std::string> member_names(const CombinePool& pool, const std::vector<int>& subset) {
    std::vector<std::string> names;
    names.reserve(subset.size());
    for (int s : subset) names.push_back(pool.streams[s].name);
    return names;
}

/// Output skeleton: calendar after the warmup, metadata shared by the pool
/// where uniform. Mixed pools leave window 0 (no window suffix in the name)
/// and fall back to the identity family tag.
ForecastStream make_output(const CombinePool& pool, const std::string& scheme) {
    ForecastStream out;
    out.model = pool.streams.front().model;
    out.window = pool.streams.front().window;
    out.family = pool.streams.front().family;
    out.param = 0.0;
    for (const auto& s : pool.streams) {
        if (s.window != out.window) out.window = 0;
        if (s.family != out.family) out.family = vst::Family::identity;
    }
    out.name = scheme + "(" + pool.label + ")";
    if (out.window != 0) out.name += "/" + std::to_string(out.window);
    out.first_day = pool.first_day + pool.warmup;
    out.fc.assign(static_cast<std::size_t>(pool.eval_days()) * 24, 0.0);
    return out;
}

double subset_mean(const CombinePool& pool, const std::vector<int>& subset, int d, int h) {
    double m = 0.0;
    for (int s : subset) m += pool.fc(s, d, h);
    return m / static_cast<double>(subset.size());
}

CombineResult run_fixed(const CombinePool& pool, const std::string& scheme, int cap) {
    CombineResult res;
    res.stream = make_output(pool, scheme);
    const auto subsets = enumerate_subsets(static_cast<int>(pool.streams.size()), cap);
    for (int h = 0; h < 24; ++h) {
        const auto* best = best_subset(pool, subsets, h, 0, pool.warmup);
        res.choices.push_back({res.stream.first_day, h + 1, member_names(pool, *best)});
        for (int e = 0; e < pool.eval_days(); ++e)
            res.stream.fc[e * 24 + h] = subset_mean(pool, *best, pool.warmup + e, h);
    }
    return res;
}

CombineResult run_rolling(const CombinePool& pool, const std::string& scheme, int cap) {
    CombineResult res;
    res.stream = make_output(pool, scheme);
    const auto subsets = enumerate_subsets(static_cast<int>(pool.streams.size()), cap);
    for (int e = 0; e < pool.eval_days(); ++e) {
        const int g = pool.warmup + e;
        for (int h = 0; h < 24; ++h) {
            const auto* best = best_subset(pool, subsets, h, g - pool.warmup, g);
            res.choices.push_back({pool.first_day + g, h + 1, member_names(pool, *best)});
            res.stream.fc[e * 24 + h] = subset_mean(pool, *best, g, h);
        }
    }
    return res;
}

}  // namespace

CombinePool make_pool(std::vector<backtest::ForecastStream> streams,
                      const data::HourlyPanel& actual, int warmup, std::string label) {
    if (streams.empty()) throw std::invalid_argument("combiner pool is empty");
    if (warmup < 1) throw std::invalid_argument("combiner warmup must be >= 1");
    std::sort(streams.begin(), streams.end(),
              [](const ForecastStream& a, const ForecastStream& b) { return a.name < b.name; });
    for (std::size_t i = 1; i < streams.size(); ++i)
        if (streams[i].name == streams[i - 1].name)
            throw std::invalid_argument("duplicate stream name in combiner pool: " +
                                        streams[i].name);
    const Date first = streams.front().first_day;
    const int days = streams.front().days();
    for (const auto& s : streams)
        if (s.first_day != first || s.days() != days)
            throw std::invalid_argument("misaligned streams in combiner pool");
    if (days <= warmup)
        throw std::invalid_argument("combiner pool needs more days than the warmup");
    const int offset = first - actual.first_day;
    if (offset < 0 || offset + days > actual.days)
        throw std::invalid_argument("actual prices do not cover the combiner pool");

    CombinePool pool;
    pool.streams = std::move(streams);
    pool.first_day = first;
    pool.days = days;
    pool.warmup = warmup;
    pool.label = std::move(label);
    pool.actual.assign(actual.price.begin() + static_cast<std::ptrdiff_t>(offset) * 24,
                       actual.price.begin() + static_cast<std::ptrdiff_t>(offset + days) * 24);
    return pool;
}

CombineResult sel_fix(const CombinePool& pool) { return run_fixed(pool, "SEL_fix", 1); }

CombineResult sel_roll(const CombinePool& pool) { return run_rolling(pool, "SEL_roll", 1); }

CombineResult avg_fix(const CombinePool& pool, int subset_cap) {
    if (subset_cap < 1) throw std::invalid_argument("subset cap must be >= 1");
    return run_fixed(pool, "AVG_fix", subset_cap);
}

CombineResult avg_roll(const CombinePool& pool, int subset_cap) {
    if (subset_cap < 1) throw std::invalid_argument("subset cap must be >= 1");
    return run_rolling(pool, "AVG_roll", subset_cap);
}

std::string choices_to_csv(const std::vector<ComboChoice>& choices) {
    std::string out = "day,hour,members\n";
    for (const auto& c : choices) {
        out += c.day.to_string();
        out += ',';
        out += std::to_string(c.hour);
        out += ',';
        for (std::size_t i = 0; i < c.members.size(); ++i) {
            if (i > 0) out += '+';
            out += c.members[i];
        }
        out += '\n';
    }
    return out;
}

void write_choice_csv(const std::vector<ComboChoice>& choices, const std::string& path) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << choices_to_csv(choices);
    if (!out.flush()) throw std::runtime_error("write failed: " + path);
}

}  // namespace epfvst::combine
