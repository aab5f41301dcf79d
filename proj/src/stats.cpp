#include "epfvst/stats.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace epfvst::stats {

double median(std::span<const double> x) {
    if (x.empty()) throw std::invalid_argument("median of empty sample");
    std::vector<double> v(x.begin(), x.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        const double lo = *std::max_element(v.begin(), v.begin() + mid);
        m = 0.5 * (lo + m);
    }
    return m;
}

double mad(std::span<const double> x, double center) {
    std::vector<double> dev(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) dev[i] = std::abs(x[i] - center);
    return median(dev);
}

double student_t_cdf(double x, double nu) {
    const boost::math::students_t dist(nu);
    return boost::math::cdf(dist, x);
}

double student_t_quantile(double p, double nu) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("t quantile needs p in (0,1)");
    const boost::math::students_t dist(nu);
    return boost::math::quantile(dist, p);
}

double normal_cdf(double x) {
    static const boost::math::normal dist;
    return boost::math::cdf(dist, x);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal quantile needs p in (0,1)");
    static const boost::math::normal dist;
    return boost::math::quantile(dist, p);
}

double chi_squared_sf(double x, double dof) {
    const boost::math::chi_squared dist(dof);
    return boost::math::cdf(boost::math::complement(dist, x));
}

}  // namespace epfvst::stats
