#pragma once

#include <string>
#include <utility>

#include <Eigen/Dense>

#include "epfvst/panel.hpp"

namespace epfvst::models {

/// Day range in panel day indices: days [first, first + count).
struct DayRange {
    int first = 0;
    int count = 0;
};

/// Width of one autoregressive design row:
///   cols 0..23    prices of day d-1, hours 1..24
///   cols 24..47   prices of day d-7
///   col  48, 49   min and max price of day d-1
///   cols 50..73   load forecast of day d
///   cols 74..97   load forecast of day d-1
///   cols 98..121  RES forecast of day d
///   cols 122..145 RES forecast of day d-1
///   cols 146..149 coal, gas, oil, EUA closes of day d-2
///   cols 150..156 weekday one-hot, Monday..Sunday
/// The row depends on the target day only, never on the target hour, so one
/// matrix serves all 24 hourly regressions.
inline constexpr int kLearWidth = 157;

/// Design rows for every target day in `window` (one row per day) plus the
/// 24 per-hour target columns. The panel must hold transformed prices and
/// standardized exogenous series. Requires window.first >= 7 (lags reach back
/// seven days) and window.count >= 8.
struct LearDesign {
    Eigen::MatrixXd X;        // count x 157
    Eigen::MatrixXd targets;  // count x 24
};

LearDesign build_lear_design_all(const data::HourlyPanel& panel, DayRange window);

/// Single-hour view (hour in 1..24): the same matrix with one target column.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> build_lear_design(
    const data::HourlyPanel& panel, DayRange window, int hour);

/// The regressor row for forecasting day d (all hours share it). Requires
/// d >= 7 and d < panel.days.
Eigen::VectorXd lear_forecast_row(const data::HourlyPanel& panel, int d);

enum class PenaltyRule { fixed, info_criterion };

/// L1-penalized least squares fit of 1/(2n) * ||y - X b||^2 + lambda * ||b||_1
/// on internally standardized columns. `beta` lives on the standardized
/// column scale; predictions undo the scaling via col_center/col_scale.
struct LassoFit {
    Eigen::VectorXd beta;
    double intercept = 0.0;  // mean of the targets
    double lambda = 0.0;     // penalty actually used
    Eigen::VectorXd col_center;
    Eigen::VectorXd col_scale;  // 1.0 for constant columns (their beta is 0)

    int nonzeros() const { return static_cast<int>((beta.array() != 0.0).count()); }
};

/// Reusable solver for many target vectors over one design matrix: the
/// backtest fits 24 hourly regressions against the same regressors, so the
/// column standardization and the Gram matrix are computed once.
class LassoProblem {
public:
    /// Throws std::invalid_argument on an empty design, fewer than 8 rows, or
    /// non-finite entries.
    explicit LassoProblem(const Eigen::MatrixXd& X);

    /// PenaltyRule::fixed uses `fixed_lambda` (>= 0); info_criterion scans a
    /// 100-point log-spaced path from lambda_max down four decades and picks
    /// the minimum-BIC point, BIC = RSS/Var(y) + nnz log(n). The scan stops
    /// early once the remaining tail is dominated: the fit is numerically
    /// exact, the active set saturates the row count, or several consecutive
    /// points lose to the incumbent on their complexity penalty alone.
    LassoFit solve(const Eigen::VectorXd& y, PenaltyRule rule, double fixed_lambda = 0.0) const;

    int rows() const { return n_; }
    int cols() const { return static_cast<int>(center_.size()); }

private:
    int n_ = 0;
    Eigen::MatrixXd gram_;   // Z'Z / n of the standardized columns
    Eigen::MatrixXd z_;      // standardized columns (constant columns zeroed)
    Eigen::VectorXd center_;
    Eigen::VectorXd scale_;
};

LassoFit fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, PenaltyRule rule,
                   double fixed_lambda = 0.0);

/// intercept + beta . standardized(row). Throws on width mismatch.
double predict_lear(const LassoFit& fit, const Eigen::VectorXd& row);

/// Decimal-text serialization for audit; round-trips exactly.
std::string lasso_to_text(const LassoFit& fit);
LassoFit lasso_from_text(const std::string& text);

}  // namespace epfvst::models
