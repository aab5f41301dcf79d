#include "epfvst/narx.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "epfvst/rng.hpp"

namespace epfvst::models {
namespace {

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw std::runtime_error("bad number in model text: " + s);
    return v;
}

Eigen::VectorXd scale_input(const NarxNet& net, const Eigen::VectorXd& input) {
    Eigen::VectorXd x(input.size());
    for (Eigen::Index i = 0; i < input.size(); ++i) {
        const double span = net.in_hi[i] - net.in_lo[i];
        x[i] = span > 0.0 ? 2.0 * (input[i] - net.in_lo[i]) / span - 1.0 : 0.0;
    }
    return x;
}

struct AdamState {
    Eigen::MatrixXd m_w1, v_w1;
    Eigen::VectorXd m_b1, v_b1, m_w2, v_w2;
    double m_b2 = 0.0, v_b2 = 0.0;
    int t = 0;
};

}  // namespace

double NarxNet::predict(const Eigen::VectorXd& input) const {
    if (input.size() != kNarxInputs) throw std::invalid_argument("input width mismatch");
    const Eigen::VectorXd x = scale_input(*this, input);
    const Eigen::VectorXd h = ((w1 * x) + b1).array().tanh();
    return w2.dot(h) + b2;
}

Eigen::VectorXd narx_input(const data::HourlyPanel& panel, int d, int hour) {
    if (hour < 1 || hour > 24) throw std::invalid_argument("hour must be in 1..24");
    if (d < 7 || d >= panel.days)
        throw std::invalid_argument("forecast day needs 7 lag days inside the panel");
    const int h = hour - 1;
    Eigen::VectorXd in(kNarxInputs);
    double lo = panel.price_at(d - 1, 0), hi = lo;
    for (int k = 0; k < 24; ++k) {
        lo = std::min(lo, panel.price_at(d - 1, k));
        hi = std::max(hi, panel.price_at(d - 1, k));
    }
    in[0] = panel.price_at(d - 1, h);
    in[1] = panel.price_at(d - 2, h);
    in[2] = panel.price_at(d - 7, h);
    in[3] = panel.price_at(d - 1, 23);
    in[4] = lo;
    in[5] = hi;
    in[6] = panel.load_at(d, h);
    in[7] = panel.res_at(d, h);
    in[8] = panel.coal[d - 2];
    in[9] = panel.gas[d - 2];
    in[10] = panel.oil[d - 2];
    in[11] = panel.eua[d - 2];
    const int wd = panel.weekday(d);
    in[12] = wd == 1 ? 1.0 : 0.0;
    in[13] = wd == 7 ? 1.0 : 0.0;
    return in;
}

std::vector<NarxNet> train_narx(const data::HourlyPanel& panel, DayRange window, int hour,
                                const std::vector<std::uint64_t>& seeds,
                                const NarxTrainConfig& cfg) {
    if (window.count < 56) throw std::invalid_argument("training window shorter than 56 days");
    if (window.first < 7)
        throw std::invalid_argument("training window needs 7 lag days before it");
    if (window.first + window.count > panel.days)
        throw std::invalid_argument("training window exceeds the panel");
    if (seeds.empty()) throw std::invalid_argument("no training seeds");
    if (hour < 1 || hour > 24) throw std::invalid_argument("hour must be in 1..24");

    const int n = window.count;
    Eigen::MatrixXd inputs(kNarxInputs, n);
    Eigen::VectorXd targets(n);
    for (int r = 0; r < n; ++r) {
        const int day = window.first + r;
        inputs.col(r) = narx_input(panel, day, hour);
        targets[r] = panel.price_at(day, hour - 1);
    }
    if (!inputs.allFinite() || !targets.allFinite())
        throw std::invalid_argument("non-finite training data");

    // Min-max bounds from the full window, mapping each input to [-1, 1].
    Eigen::VectorXd in_lo = inputs.rowwise().minCoeff();
    Eigen::VectorXd in_hi = inputs.rowwise().maxCoeff();
    Eigen::MatrixXd scaled(kNarxInputs, n);
    for (int i = 0; i < kNarxInputs; ++i) {
        const double span = in_hi[i] - in_lo[i];
        for (int r = 0; r < n; ++r)
            scaled(i, r) = span > 0.0 ? 2.0 * (inputs(i, r) - in_lo[i]) / span - 1.0 : 0.0;
    }

    // Hold out the most recent rows for early stopping.
    const int val_n = std::max(1, static_cast<int>(std::lround(cfg.validation_fraction * n)));
    const int train_n = n - val_n;
    if (train_n < 1) throw std::invalid_argument("validation split leaves no training rows");

    std::vector<NarxNet> ensemble;
    ensemble.reserve(seeds.size());
    for (const std::uint64_t seed : seeds) {
        Rng rng(seed);
        NarxNet net;
        net.seed = seed;
        net.in_lo = in_lo;
        net.in_hi = in_hi;
        // Uniform fan-balanced init.
        const double lim1 = std::sqrt(6.0 / (kNarxInputs + kNarxHidden));
        const double lim2 = std::sqrt(6.0 / (kNarxHidden + 1.0));
        net.w1.resize(kNarxHidden, kNarxInputs);
        for (int i = 0; i < kNarxHidden; ++i)
            for (int j = 0; j < kNarxInputs; ++j) net.w1(i, j) = rng.uniform(-lim1, lim1);
        net.b1 = Eigen::VectorXd::Zero(kNarxHidden);
        net.w2.resize(kNarxHidden);
        for (int i = 0; i < kNarxHidden; ++i) net.w2[i] = rng.uniform(-lim2, lim2);
        net.b2 = 0.0;

        AdamState adam;
        adam.m_w1 = Eigen::MatrixXd::Zero(kNarxHidden, kNarxInputs);
        adam.v_w1 = adam.m_w1;
        adam.m_b1 = Eigen::VectorXd::Zero(kNarxHidden);
        adam.v_b1 = adam.m_b1;
        adam.m_w2 = Eigen::VectorXd::Zero(kNarxHidden);
        adam.v_w2 = adam.m_w2;
        constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

        const auto val_mse = [&]() {
            double acc = 0.0;
            for (int r = train_n; r < n; ++r) {
                const Eigen::VectorXd h = ((net.w1 * scaled.col(r)) + net.b1).array().tanh();
                const double e = net.w2.dot(h) + net.b2 - targets[r];
                acc += e * e;
            }
            return acc / val_n;
        };

        NarxNet best = net;
        double best_val = val_mse();
        int since_best = 0;
        std::vector<int> order(train_n);
        std::iota(order.begin(), order.end(), 0);

        for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
            rng.shuffle(order);
            for (int start = 0; start < train_n; start += cfg.batch_size) {
                const int stop = std::min(start + cfg.batch_size, train_n);
                const double inv = 1.0 / static_cast<double>(stop - start);
                Eigen::MatrixXd g_w1 = Eigen::MatrixXd::Zero(kNarxHidden, kNarxInputs);
                Eigen::VectorXd g_b1 = Eigen::VectorXd::Zero(kNarxHidden);
                Eigen::VectorXd g_w2 = Eigen::VectorXd::Zero(kNarxHidden);
                double g_b2 = 0.0;
                for (int k = start; k < stop; ++k) {
                    const int r = order[k];
                    const Eigen::VectorXd x = scaled.col(r);
                    const Eigen::VectorXd h = ((net.w1 * x) + net.b1).array().tanh();
                    const double out = net.w2.dot(h) + net.b2;
                    const double de = 2.0 * (out - targets[r]) * inv;  // d MSE / d out
                    g_w2 += de * h;
                    g_b2 += de;
                    const Eigen::VectorXd dh =
                        (de * net.w2.array() * (1.0 - h.array().square())).matrix();
                    g_w1 += dh * x.transpose();
                    g_b1 += dh;
                }
                ++adam.t;
                const double corr1 = 1.0 - std::pow(kBeta1, adam.t);
                const double corr2 = 1.0 - std::pow(kBeta2, adam.t);
                const auto step = [&](auto& param, auto& m, auto& v, const auto& grad) {
                    m = kBeta1 * m + (1.0 - kBeta1) * grad;
                    v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
                    param -= (cfg.learning_rate * (m / corr1).array() /
                              ((v / corr2).array().sqrt() + kEps))
                                 .matrix();
                };
                step(net.w1, adam.m_w1, adam.v_w1, g_w1);
                step(net.b1, adam.m_b1, adam.v_b1, g_b1);
                step(net.w2, adam.m_w2, adam.v_w2, g_w2);
                adam.m_b2 = kBeta1 * adam.m_b2 + (1.0 - kBeta1) * g_b2;
                adam.v_b2 = kBeta2 * adam.v_b2 + (1.0 - kBeta2) * g_b2 * g_b2;
                net.b2 -= cfg.learning_rate * (adam.m_b2 / corr1) /
                          (std::sqrt(adam.v_b2 / corr2) + kEps);
            }
            const double v = val_mse();
            if (v < best_val) {
                best_val = v;
                best = net;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                break;
            }
        }
        ensemble.push_back(std::move(best));
    }
    return ensemble;
}

double predict_narx(const std::vector<NarxNet>& ensemble, const Eigen::VectorXd& input) {
    if (ensemble.empty()) throw std::invalid_argument("empty ensemble");
    double acc = 0.0;
    for (const NarxNet& net : ensemble) acc += net.predict(input);
    return acc / static_cast<double>(ensemble.size());
}

std::string narx_to_text(const NarxNet& net) {
    std::string out = "narx v1\n";
    out += "seed " + std::to_string(net.seed) + "\n";
    const auto emit_vec = [&out](const char* name, const Eigen::VectorXd& v) {
        out += name;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            out += ' ';
            out += format_double(v[i]);
        }
        out += '\n';
    };
    out += "w1";
    for (int i = 0; i < kNarxHidden; ++i)
        for (int j = 0; j < kNarxInputs; ++j) {
            out += ' ';
            out += format_double(net.w1(i, j));
        }
    out += '\n';
    emit_vec("b1", net.b1);
    emit_vec("w2", net.w2);
    out += "b2 " + format_double(net.b2) + "\n";
    emit_vec("in_lo", net.in_lo);
    emit_vec("in_hi", net.in_hi);
    return out;
}

NarxNet narx_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "narx v1")
        throw std::runtime_error("unrecognized model text header");
    NarxNet net;
    std::string key;
    in >> key;
    if (key != "seed") throw std::runtime_error("model text missing seed");
    in >> net.seed;
    const auto read_vec = [&in](const char* name, Eigen::VectorXd& v, int len) {
        std::string k, cell;
        if (!(in >> k) || k != name)
            throw std::runtime_error(std::string("model text missing ") + name);
        v.resize(len);
        for (int i = 0; i < len; ++i) {
            if (!(in >> cell)) throw std::runtime_error("model text truncated");
            v[i] = parse_double(cell);
        }
    };
    std::string k, cell;
    if (!(in >> k) || k != "w1") throw std::runtime_error("model text missing w1");
    net.w1.resize(kNarxHidden, kNarxInputs);
    for (int i = 0; i < kNarxHidden; ++i)
        for (int j = 0; j < kNarxInputs; ++j) {
            if (!(in >> cell)) throw std::runtime_error("model text truncated");
            net.w1(i, j) = parse_double(cell);
        }
    read_vec("b1", net.b1, kNarxHidden);
    read_vec("w2", net.w2, kNarxHidden);
    if (!(in >> k >> cell) || k != "b2") throw std::runtime_error("model text missing b2");
    net.b2 = parse_double(cell);
    read_vec("in_lo", net.in_lo, kNarxInputs);
    read_vec("in_hi", net.in_hi, kNarxInputs);
    return net;
}

}  // namespace epfvst::models
