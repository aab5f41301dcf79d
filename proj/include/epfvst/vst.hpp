#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace epfvst::vst {

/// Robust location/scale pair fitted on a calibration window: center is the
/// median, scale the median absolute deviation (optionally multiplied by the
/// normal-consistency constant 1.4826). Fitted from calibration data only.
struct Standardizer {
    double center = 0.0;
    double scale = 1.0;
    bool adjusted = false;

    double to_std(double price) const { return (price - center) / scale; }
    double from_std(double x) const { return x * scale + center; }
};

/// Throws std::invalid_argument("zero MAD") when the sample has no spread.
Standardizer fit_standardizer(std::span<const double> prices, bool adjust);

enum class Family { identity, asinh, boxcox, mlog, tpit };

const char* family_name(Family f);
Family family_from_name(const std::string& name);

/// Empirical CDF over a standardized calibration sample using plotting
/// positions r/(n+1). Tied values are collapsed into one knot carrying the
/// mean of their positions, so both directions of the piecewise-linear map
/// stay strictly monotone.
class EmpiricalCdf {
public:
    EmpiricalCdf(std::span<const double> standardized_sample);

    /// Interpolated probability at x; linear extrapolation outside the sample
    /// using the outermost segment slope (unclamped).
    double prob_at(double x) const;

    /// Inverse map, probability -> standardized value, with linear tail
    /// extrapolation beyond the extreme plotting positions.
    double value_at(double p) const;

    int sample_size() const { return n_; }
    double min_value() const { return values_.front(); }
    double max_value() const { return values_.back(); }

private:
    std::vector<double> values_;  // unique, ascending
    std::vector<double> probs_;   // matching plotting positions, ascending
    int n_ = 0;                   // raw sample size (before tie collapsing)
};

/// One transformation family plus its parameter: c for asinh/mlog, lambda for
/// boxcox, nu (degrees of freedom) for tpit; unused for identity. T-PIT
/// additionally carries the empirical CDF fitted on the calibration window.
struct TransformSpec {
    Family family = Family::identity;
    double param = 0.0;
    std::optional<EmpiricalCdf> fitted;  // tpit only

    /// Enforces the parameter ranges: asinh/mlog 0 < c <= 1, boxcox
    /// 0 <= lambda <= 1, tpit nu >= 3. Throws std::invalid_argument.
    void validate() const;
};

/// Builds a T-PIT spec from a calibration price series (>= 30 points).
TransformSpec fit_tpit(std::span<const double> prices, double nu, const Standardizer& std);

/// The transformation acting on an already standardized value.
double forward_std(const TransformSpec& spec, double x);
double inverse_std(const TransformSpec& spec, double y);

/// Full price-scale maps: standardize, transform, and back.
double forward(const TransformSpec& spec, const Standardizer& std, double price);
double inverse(const TransformSpec& spec, const Standardizer& std, double y);

/// Analytic derivative of the standardized-space map at the origin:
/// c for asinh and mlog, 1 for boxcox and identity. Errors for tpit, whose
/// slope depends on the fitted sample.
double slope_at_origin(const TransformSpec& spec);

/// Parameter sweep per family. Defaults: asinh and mlog c in {0.1..1.0} step
/// 0.1, boxcox lambda in {0.0..1.0} step 0.1, tpit nu in {9,16,25,36,49},
/// identity a single placeholder 0.
struct ParamGrid {
    std::map<Family, std::vector<double>> values;

    static ParamGrid defaults();
    const std::vector<double>& for_family(Family f) const;
};

/// Canonical rendering of a parameter for stream keys and file names:
/// one decimal for c/lambda, integer for nu, "0" for identity.
std::string format_param(Family f, double param);

}  // namespace epfvst::vst
