#include "epfvst/vst.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "epfvst/stats.hpp"

namespace epfvst::vst {
namespace {

inline double sgn(double x) { return x < 0.0 ? -1.0 : 1.0; }

constexpr double kMadNormalConsistency = 1.4826;

}  // namespace

Standardizer fit_standardizer(std::span<const double> prices, bool adjust) {
    if (prices.size() < 2) throw std::invalid_argument("standardizer needs at least 2 prices");
    const double center = stats::median(prices);
    const double raw = stats::mad(prices, center);
    if (raw <= 0.0) throw std::invalid_argument("zero MAD");
    Standardizer s;
    s.center = center;
    s.scale = adjust ? raw * kMadNormalConsistency : raw;
    s.adjusted = adjust;
    return s;
}

const char* family_name(Family f) {
    switch (f) {
        case Family::identity: return "identity";
        case Family::asinh: return "asinh";
        case Family::boxcox: return "boxcox";
        case Family::mlog: return "mlog";
        case Family::tpit: return "tpit";
    }
    return "?";
}

Family family_from_name(const std::string& name) {
    if (name == "identity") return Family::identity;
    if (name == "asinh") return Family::asinh;
    if (name == "boxcox") return Family::boxcox;
    if (name == "mlog") return Family::mlog;
    if (name == "tpit") return Family::tpit;
    throw std::invalid_argument("unknown transform family: " + name);
}

EmpiricalCdf::EmpiricalCdf(std::span<const double> standardized_sample) {
    n_ = static_cast<int>(standardized_sample.size());
    if (n_ < 2) throw std::invalid_argument("empirical CDF needs at least 2 points");
    std::vector<double> sorted(standardized_sample.begin(), standardized_sample.end());
    std::sort(sorted.begin(), sorted.end());
    for (double v : sorted)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite value in CDF sample");

    // Plotting positions r/(n+1); ties collapse to the mean of their positions.
    values_.reserve(sorted.size());
    probs_.reserve(sorted.size());
    const double denom = static_cast<double>(n_) + 1.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        // ranks i+1 .. j, mean rank = (i+1+j)/2
        const double mean_rank = 0.5 * static_cast<double>(i + 1 + j);
        values_.push_back(sorted[i]);
        probs_.push_back(mean_rank / denom);
        i = j;
    }
    if (values_.size() < 2) throw std::invalid_argument("degenerate CDF sample (all values tied)");
}

double EmpiricalCdf::prob_at(double x) const {
    const auto it = std::lower_bound(values_.begin(), values_.end(), x);
    std::size_t hi = static_cast<std::size_t>(it - values_.begin());
    // Pick the segment [lo, hi] whose x-span brackets (or extends toward) x.
    if (hi == 0) hi = 1;
    if (hi >= values_.size()) hi = values_.size() - 1;
    const std::size_t lo = hi - 1;
    const double t = (x - values_[lo]) / (values_[hi] - values_[lo]);
    return probs_[lo] + t * (probs_[hi] - probs_[lo]);
}

double EmpiricalCdf::value_at(double p) const {
    const auto it = std::lower_bound(probs_.begin(), probs_.end(), p);
    std::size_t hi = static_cast<std::size_t>(it - probs_.begin());
    if (hi == 0) hi = 1;
    if (hi >= probs_.size()) hi = probs_.size() - 1;
    const std::size_t lo = hi - 1;
    const double t = (p - probs_[lo]) / (probs_[hi] - probs_[lo]);
    return values_[lo] + t * (values_[hi] - values_[lo]);
}

void TransformSpec::validate() const {
    switch (family) {
        case Family::identity:
            return;
        case Family::asinh:
        case Family::mlog:
            if (!(param > 0.0 && param <= 1.0))
                throw std::invalid_argument(std::string(family_name(family)) +
                                            " requires 0 < c <= 1");
            return;
        case Family::boxcox:
            if (!(param >= 0.0 && param <= 1.0))
                throw std::invalid_argument("boxcox requires 0 <= lambda <= 1");
            return;
        case Family::tpit:
            if (!(param >= 3.0)) throw std::invalid_argument("tpit requires nu >= 3");
            return;
    }
}

TransformSpec fit_tpit(std::span<const double> prices, double nu, const Standardizer& std_) {
    if (!(nu >= 3.0)) throw std::invalid_argument("tpit requires nu >= 3");
    if (prices.size() < 30) throw std::invalid_argument("tpit needs a calibration series of >= 30");
    std::vector<double> z(prices.size());
    for (std::size_t i = 0; i < prices.size(); ++i) z[i] = std_.to_std(prices[i]);
    TransformSpec spec;
    spec.family = Family::tpit;
    spec.param = nu;
    spec.fitted.emplace(z);
    return spec;
}

double forward_std(const TransformSpec& spec, double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite input to transform");
    spec.validate();
    const double c = spec.param;
    switch (spec.family) {
        case Family::identity:
            return x;
        case Family::asinh: {
            const double a = std::sqrt(1.0 / (c * c) - 1.0);
            return sgn(x) * (std::asinh(std::fabs(x) + a) - std::asinh(a));
        }
        case Family::boxcox: {
            const double lam = c;
            const double ax = std::fabs(x);
            if (lam == 0.0) return sgn(x) * std::log1p(ax);
            if (lam == 1.0) return x;
            return sgn(x) * std::expm1(lam * std::log1p(ax)) / lam;
        }
        case Family::mlog:
            // sgn(x) [log(|x| + 1/c) + log c] == sgn(x) log1p(c |x|)
            return sgn(x) * std::log1p(c * std::fabs(x));
        case Family::tpit: {
            if (!spec.fitted) throw std::invalid_argument("tpit forward without fitted CDF");
            const double n = spec.fitted->sample_size();
            const double p =
                std::clamp(spec.fitted->prob_at(x), 1.0 / (n + 1.0), n / (n + 1.0));
            return stats::student_t_quantile(p, spec.param);
        }
    }
    throw std::logic_error("unreachable transform family");
}

double inverse_std(const TransformSpec& spec, double y) {
    if (!std::isfinite(y)) throw std::invalid_argument("non-finite input to inverse transform");
    spec.validate();
    const double c = spec.param;
    switch (spec.family) {
        case Family::identity:
            return y;
        case Family::asinh: {
            const double a = std::sqrt(1.0 / (c * c) - 1.0);
            return sgn(y) * (std::sinh(std::fabs(y) + std::asinh(a)) - a);
        }
        case Family::boxcox: {
            const double lam = c;
            const double ay = std::fabs(y);
            if (lam == 0.0) return sgn(y) * std::expm1(ay);
            if (lam == 1.0) return y;
            return sgn(y) * std::expm1(std::log1p(lam * ay) / lam);
        }
        case Family::mlog:
            return sgn(y) * std::expm1(std::fabs(y)) / c;
        case Family::tpit: {
            if (!spec.fitted) throw std::invalid_argument("tpit inverse without fitted CDF");
            const double p = stats::student_t_cdf(y, spec.param);
            return spec.fitted->value_at(p);
        }
    }
    throw std::logic_error("unreachable transform family");
}

double forward(const TransformSpec& spec, const Standardizer& std_, double price) {
    return forward_std(spec, std_.to_std(price));
}

double inverse(const TransformSpec& spec, const Standardizer& std_, double y) {
    return std_.from_std(inverse_std(spec, y));
}

double slope_at_origin(const TransformSpec& spec) {
    spec.validate();
    switch (spec.family) {
        case Family::identity:
        case Family::boxcox:
            return 1.0;
        case Family::asinh:
        case Family::mlog:
            return spec.param;
        case Family::tpit:
            throw std::invalid_argument("data-dependent slope");
    }
    throw std::logic_error("unreachable transform family");
}

ParamGrid ParamGrid::defaults() {
    ParamGrid g;
    std::vector<double> tenths;
    for (int i = 1; i <= 10; ++i) tenths.push_back(i / 10.0);
    g.values[Family::identity] = {0.0};
    g.values[Family::asinh] = tenths;
    g.values[Family::mlog] = tenths;
    std::vector<double> lambdas = {0.0};
    lambdas.insert(lambdas.end(), tenths.begin(), tenths.end());
    g.values[Family::boxcox] = lambdas;
    g.values[Family::tpit] = {9.0, 16.0, 25.0, 36.0, 49.0};
    return g;
}

const std::vector<double>& ParamGrid::for_family(Family f) const {
    const auto it = values.find(f);
    if (it == values.end())
        throw std::invalid_argument(std::string("no grid for family ") + family_name(f));
    return it->second;
}

std::string format_param(Family f, double param) {
    char buf[32];
    switch (f) {
        case Family::identity:
            return "0";
        case Family::tpit:
            std::snprintf(buf, sizeof(buf), "%d", static_cast<int>(param));
            return buf;
        default:
            std::snprintf(buf, sizeof(buf), "%.1f", param);
            return buf;
    }
}

}  // namespace epfvst::vst
