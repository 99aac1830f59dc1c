#pragma once

// Stable primitives over the probability simplex.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace decoupled {

/// Probability vector over the valid actions of one state.
using Distribution = std::vector<double>;

namespace detail {

inline void require_non_empty(std::span<const double> values, const char* what) {
    if (values.empty())
        throw std::invalid_argument(std::string(what) + ": empty input");
}

inline void require_positive_temperature(double temperature, const char* what) {
    if (!(temperature > 0.0))
        throw std::invalid_argument(std::string(what) + ": temperature must be positive");
}

}  // namespace detail

/// True when every entry is non-negative and the entries sum to one within `tol`.
inline bool is_distribution(std::span<const double> p, double tol = 1e-12) {
    if (p.empty())
        return false;
    double sum = 0.0;
    for (double x : p) {
        if (!(x >= 0.0) || !std::isfinite(x))
            return false;
        sum += x;
    }
    return std::abs(sum - 1.0) <= tol;
}

inline Distribution uniform_distribution(std::size_t n) {
    return Distribution(n, 1.0 / static_cast<double>(n));
}

inline Distribution deterministic_distribution(std::size_t n, std::size_t index) {
    Distribution p(n, 0.0);
    p.at(index) = 1.0;
    return p;
}

/// Smoothed maximum tau * log(sum exp(v / tau)), shifted by the max so that
/// |v| up to 1e6 cannot overflow.
inline double log_sum_exp(std::span<const double> values, double temperature) {
    detail::require_non_empty(values, "log_sum_exp");
    detail::require_positive_temperature(temperature, "log_sum_exp");
    const double top = *std::max_element(values.begin(), values.end());
    if (!std::isfinite(top))
        return top;
    double acc = 0.0;
    for (double v : values)
        acc += std::exp((v - top) / temperature);
    return top + temperature * std::log(acc);
}

/// Gradient of log_sum_exp: pi(a) proportional to exp(v_a / tau).
inline Distribution softmax(std::span<const double> values, double temperature) {
    detail::require_non_empty(values, "softmax");
    detail::require_positive_temperature(temperature, "softmax");
    const double top = *std::max_element(values.begin(), values.end());
    Distribution out(values.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = std::exp((values[i] - top) / temperature);
        acc += out[i];
    }
    for (double& x : out)
        x /= acc;
    return out;
}

/// Euclidean projection onto the probability simplex (sort and threshold).
inline Distribution project_simplex(std::span<const double> v) {
    detail::require_non_empty(v, "project_simplex");
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());

    double cumulative = 0.0;
    double threshold = 0.0;
    for (std::size_t j = 0; j < sorted.size(); ++j) {
        cumulative += sorted[j];
        const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (sorted[j] - candidate > 0.0)
            threshold = candidate;
    }

    Distribution out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = std::max(v[i] - threshold, 0.0);
    return out;
}

/// Shannon entropy in nats with 0 log 0 = 0.
inline double discrete_entropy(std::span<const double> p) {
    double h = 0.0;
    for (double x : p)
        if (x > 0.0)
            h -= x * std::log(x);
    return std::max(h, 0.0);
}

}  // namespace decoupled
