#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epfvst/lear.hpp"  // DayRange
#include "epfvst/panel.hpp"

namespace epfvst::models {

/// Input layout of the hourly network, one value per slot:
///   0 price(d-1, h)   1 price(d-2, h)   2 price(d-7, h)   3 price(d-1, 24)
///   4 min price d-1   5 max price d-1   6 load(d, h)      7 RES(d, h)
///   8..11 coal/gas/oil/EUA closes of d-2
///   12 Monday dummy   13 Sunday dummy
inline constexpr int kNarxInputs = 14;
inline constexpr int kNarxHidden = 5;

/// One feedforward net: tanh hidden layer of five units, linear output.
/// in_lo/in_hi are the training min-max bounds mapping inputs to [-1, 1].
struct NarxNet {
    Eigen::MatrixXd w1;  // 5 x 14
    Eigen::VectorXd b1;  // 5
    Eigen::VectorXd w2;  // 5
    double b2 = 0.0;
    Eigen::VectorXd in_lo;  // 14
    Eigen::VectorXd in_hi;  // 14
    std::uint64_t seed = 0;

    double predict(const Eigen::VectorXd& input) const;
};

struct NarxTrainConfig {
    double learning_rate = 0.01;
    int batch_size = 32;
    int patience = 10;   // epochs without validation improvement
    int max_epochs = 300;
    double validation_fraction = 0.2;  // most recent rows
};

/// The input vector for forecasting (day d, hour in 1..24). Requires d >= 7.
Eigen::VectorXd narx_input(const data::HourlyPanel& panel, int d, int hour);

/// Trains one net per seed on the window's (input, target) rows for the given
/// hour with adaptive-moment mini-batch descent on MSE; the most recent
/// validation_fraction of rows is held out for early stopping, and the
/// weights with the best validation error are kept. Deterministic per seed.
/// Requires window.first >= 7 and window.count >= 56.
std::vector<NarxNet> train_narx(const data::HourlyPanel& panel, DayRange window, int hour,
                                const std::vector<std::uint64_t>& seeds,
                                const NarxTrainConfig& cfg = {});

/// Arithmetic mean of the member outputs. Throws on an empty ensemble or an
/// input width mismatch.
double predict_narx(const std::vector<NarxNet>& ensemble, const Eigen::VectorXd& input);

/// Decimal-text serialization for audit; round-trips exactly.
std::string narx_to_text(const NarxNet& net);
NarxNet narx_from_text(const std::string& text);

}  // namespace epfvst::models
