#pragma once

// Simplex regularizers: negative entropy, KL to uniform and negative Tsallis
// entropy, together with their conjugates, ranges and the decoupling transform.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "decoupled/format.hpp"
#include "decoupled/numerics.hpp"

namespace decoupled {

enum class RegularizerKind { neg_entropy, kl_uniform, neg_tsallis };

inline std::string to_string(RegularizerKind kind) {
    switch (kind) {
        case RegularizerKind::neg_entropy: return "entropy";
        case RegularizerKind::kl_uniform: return "kl-uniform";
        case RegularizerKind::neg_tsallis: return "tsallis";
    }
    return "unknown";
}

/// Which regularizer to use and whether it is decoupled. The decoupled flag
/// never changes omega itself; consumers turn it into a per-state temperature
/// through effective_temperature().
struct RegularizerSpec {
    RegularizerKind kind = RegularizerKind::neg_entropy;
    double q = 2.0;  // Tsallis only
    double k = 1.0;  // Tsallis only
    bool decoupled = false;

    static RegularizerSpec entropy(bool decoupled = false) {
        return {RegularizerKind::neg_entropy, 2.0, 1.0, decoupled};
    }
    static RegularizerSpec kl_uniform(bool decoupled = false) {
        return {RegularizerKind::kl_uniform, 2.0, 1.0, decoupled};
    }
    static RegularizerSpec tsallis(double q = 2.0, double k = 1.0, bool decoupled = false) {
        RegularizerSpec s{RegularizerKind::neg_tsallis, q, k, decoupled};
        s.validate();
        return s;
    }

    void validate() const {
        if (kind == RegularizerKind::neg_tsallis && !(q > 1.0 && std::isfinite(q)))
            throw std::invalid_argument("tsallis regularizer requires q > 1");
        if (kind == RegularizerKind::neg_tsallis && !(k > 0.0 && std::isfinite(k)))
            throw std::invalid_argument("tsallis regularizer requires k > 0");
    }

    friend bool operator==(const RegularizerSpec&, const RegularizerSpec&) = default;
};

/// Configuration token: `entropy`, `kl-uniform`, `tsallis:q=<q>,k=<k>`, each
/// optionally followed by `:decoupled`.
inline std::string to_token(const RegularizerSpec& spec) {
    std::string token = to_string(spec.kind);
    if (spec.kind == RegularizerKind::neg_tsallis)
        token += ":q=" + format_double(spec.q) + ",k=" + format_double(spec.k);
    if (spec.decoupled)
        token += ":decoupled";
    return token;
}

inline RegularizerSpec parse_regularizer(std::string_view token) {
    const auto fail = [&](const std::string& why) -> std::invalid_argument {
        return std::invalid_argument("invalid regularizer token '" + std::string(token) + "': " + why);
    };

    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t colon = token.find(':', start);
        parts.push_back(token.substr(start, colon == std::string_view::npos ? colon : colon - start));
        if (colon == std::string_view::npos)
            break;
        start = colon + 1;
    }

    RegularizerSpec spec;
    if (parts.back() == "decoupled" && parts.size() > 1) {
        spec.decoupled = true;
        parts.pop_back();
    }

    const std::string_view name = parts.front();
    if (name == "entropy" || name == "kl-uniform") {
        if (parts.size() != 1)
            throw fail("unexpected parameters");
        spec.kind = name == "entropy" ? RegularizerKind::neg_entropy : RegularizerKind::kl_uniform;
        return spec;
    }
    if (name != "tsallis")
        throw fail("unknown regularizer '" + std::string(name) + "'");

    spec.kind = RegularizerKind::neg_tsallis;
    if (parts.size() > 2)
        throw fail("too many ':' sections");
    if (parts.size() == 2) {
        std::string_view params = parts[1];
        bool seen_q = false, seen_k = false;
        while (!params.empty()) {
            const std::size_t comma = params.find(',');
            const std::string_view item = params.substr(0, comma);
            params = comma == std::string_view::npos ? std::string_view{} : params.substr(comma + 1);
            const std::size_t eq = item.find('=');
            if (eq == std::string_view::npos)
                throw fail("expected key=value, got '" + std::string(item) + "'");
            const std::string_view key = item.substr(0, eq);
            double value = 0.0;
            try {
                value = parse_double(item.substr(eq + 1));
            } catch (const std::invalid_argument& e) {
                throw fail(e.what());
            }
            if (key == "q" && !seen_q) {
                spec.q = value;
                seen_q = true;
            } else if (key == "k" && !seen_k) {
                spec.k = value;
                seen_k = true;
            } else {
                throw fail("unknown or repeated parameter '" + std::string(key) + "'");
            }
        }
    }
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw fail(e.what());
    }
    return spec;
}

/// Omega(p). Negative entropy sum p log p, KL to uniform sum p log(p n),
/// negative Tsallis (k / (q - 1)) (sum p^q - 1).
inline double omega(const RegularizerSpec& spec, std::span<const double> p) {
    const double n = static_cast<double>(p.size());
    switch (spec.kind) {
        case RegularizerKind::neg_entropy: {
            double acc = 0.0;
            for (double x : p)
                if (x > 0.0)
                    acc += x * std::log(x);
            return acc;
        }
        case RegularizerKind::kl_uniform: {
            double acc = 0.0;
            for (double x : p)
                if (x > 0.0)
                    acc += x * std::log(x * n);
            return acc;
        }
        case RegularizerKind::neg_tsallis: {
            double acc = 0.0;
            for (double x : p)
                if (x > 0.0)
                    acc += std::pow(x, spec.q);
            return spec.k / (spec.q - 1.0) * (acc - 1.0);
        }
    }
    return 0.0;
}

/// Supremum of omega over the n-simplex (attained at any vertex).
inline double omega_sup(const RegularizerSpec& spec, std::size_t n) {
    if (n == 0)
        throw std::invalid_argument("omega_sup: n must be positive");
    return spec.kind == RegularizerKind::kl_uniform ? std::log(static_cast<double>(n)) : 0.0;
}

/// Minimum of omega over the n-simplex, i.e. omega at the uniform policy.
inline double omega_min(const RegularizerSpec& spec, std::size_t n) {
    if (n == 0)
        throw std::invalid_argument("omega_min: n must be positive");
    const double dn = static_cast<double>(n);
    switch (spec.kind) {
        case RegularizerKind::neg_entropy: return -std::log(dn);
        case RegularizerKind::kl_uniform: return 0.0;
        case RegularizerKind::neg_tsallis:
            return spec.k / (spec.q - 1.0) * (std::pow(dn, 1.0 - spec.q) - 1.0);
    }
    return 0.0;
}

/// Range sup - min of omega over the n-simplex; zero for n = 1.
inline double omega_range(const RegularizerSpec& spec, std::size_t n) {
    if (n == 0)
        throw std::invalid_argument("omega_range: n must be positive");
    const double dn = static_cast<double>(n);
    switch (spec.kind) {
        case RegularizerKind::neg_entropy:
        case RegularizerKind::kl_uniform: return std::log(dn);
        case RegularizerKind::neg_tsallis:
            return spec.k / (spec.q - 1.0) * (1.0 - std::pow(dn, 1.0 - spec.q));
    }
    return 0.0;
}

/// Temperature actually used at a state with n valid actions. Decoupled
/// regularizers divide by the range; singleton action sets keep tau because the
/// only policy there is deterministic and the quotient is undefined.
inline double effective_temperature(const RegularizerSpec& spec, double tau, std::size_t n) {
    if (!(tau > 0.0))
        throw std::invalid_argument("effective_temperature: tau must be positive");
    if (n == 0)
        throw std::invalid_argument("effective_temperature: n must be positive");
    if (!spec.decoupled || n == 1)
        return tau;
    return tau / omega_range(spec, n);
}

// Numeric conjugate ----------------------------------------------------------

/// Outcome of the iterative conjugate solver.
struct NumericConjugate {
    double value = std::numeric_limits<double>::quiet_NaN();
    Distribution policy;
    bool converged = false;
    int iterations = 0;
};

struct NumericConjugateOptions {
    double tol = 1e-10;
    int max_iter = 10'000;
};

namespace detail {

// Derivative of the per-coordinate generator phi, where omega(p) = sum phi(p_a) + const.
inline double generator_slope(const RegularizerSpec& spec, double p, std::size_t n) {
    switch (spec.kind) {
        case RegularizerKind::neg_entropy:
            return p > 0.0 ? std::log(p) + 1.0 : -std::numeric_limits<double>::infinity();
        case RegularizerKind::kl_uniform:
            return p > 0.0 ? std::log(p) + 1.0 + std::log(static_cast<double>(n))
                           : -std::numeric_limits<double>::infinity();
        case RegularizerKind::neg_tsallis:
            return spec.k * spec.q / (spec.q - 1.0) * std::pow(p, spec.q - 1.0);
    }
    return 0.0;
}

// Solves generator_slope(p) = target for p in [0, 1] by bisection.
inline double invert_slope(const RegularizerSpec& spec, double target, std::size_t n) {
    if (target >= generator_slope(spec, 1.0, n))
        return 1.0;
    if (target <= generator_slope(spec, 0.0, n))
        return 0.0;
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (generator_slope(spec, mid, n) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Maximizes <pi, Q> - tau * omega(pi) over the simplex without any closed form.
///
/// Works on the stationarity conditions: for a multiplier lambda each coordinate
/// solves phi'(pi_a) = (Q_a - lambda) / tau (clamped to [0, 1]), and lambda is
/// bisected until the coordinates sum to one. Stops once successive objective
/// values differ by less than `tol` and the multiplier bracket has collapsed.
inline NumericConjugate conjugate_numeric(const RegularizerSpec& spec, std::span<const double> q_values,
                                          double tau, NumericConjugateOptions opts = {}) {
    detail::require_non_empty(q_values, "conjugate_numeric");
    detail::require_positive_temperature(tau, "conjugate_numeric");
    spec.validate();

    NumericConjugate out;
    const std::size_t n = q_values.size();
    for (double x : q_values)
        if (!std::isfinite(x))
            return out;

    const double q_max = *std::max_element(q_values.begin(), q_values.end());
    double lo = q_max - tau * detail::generator_slope(spec, 1.0, n);
    double hi = q_max - tau * detail::generator_slope(spec, 1.0 / static_cast<double>(n), n);

    Distribution pi(n);
    const auto fill = [&](double lambda) {
        double sum = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
            pi[a] = detail::invert_slope(spec, (q_values[a] - lambda) / tau, n);
            sum += pi[a];
        }
        return sum;
    };
    const auto objective = [&]() {
        double dot = 0.0;
        for (std::size_t a = 0; a < n; ++a)
            dot += pi[a] * q_values[a];
        return dot - tau * omega(spec, pi);
    };

    double previous = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= opts.max_iter; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double sum = fill(mid);
        if (sum > 1.0)
            lo = mid;
        else
            hi = mid;
        for (double& x : pi)
            x /= sum;
        const double value = objective();
        out.iterations = it;
        const bool collapsed = (hi - lo) <= 1e-13 * std::max(1.0, std::abs(mid));
        if (std::abs(value - previous) < opts.tol && collapsed) {
            out.value = value;
            out.policy = pi;
            out.converged = true;
            return out;
        }
        previous = value;
        if (!(sum > 0.0) || !std::isfinite(value))
            break;
    }
    out.value = previous;
    out.policy = pi;
    return out;
}

// Closed-form conjugates -----------------------------------------------------

namespace detail {

inline NumericConjugate conjugate_numeric_or_throw(const RegularizerSpec& spec, std::span<const double> q_values,
                                                   double tau) {
    auto result = conjugate_numeric(spec, q_values, tau);
    if (!result.converged)
        throw std::runtime_error("conjugate: numeric maximization did not converge");
    return result;
}

inline Distribution tsallis2_policy(const RegularizerSpec& spec, std::span<const double> q_values, double tau) {
    std::vector<double> scaled(q_values.begin(), q_values.end());
    for (double& x : scaled)
        x /= 2.0 * tau * spec.k;
    return project_simplex(scaled);
}

}  // namespace detail

/// max over the simplex of <pi, Q> - tau * omega(pi). `tau` is already the
/// effective temperature; no decoupling happens here.
inline double conjugate_value(const RegularizerSpec& spec, std::span<const double> q_values, double tau) {
    detail::require_non_empty(q_values, "conjugate_value");
    detail::require_positive_temperature(tau, "conjugate_value");
    switch (spec.kind) {
        case RegularizerKind::neg_entropy: return log_sum_exp(q_values, tau);
        case RegularizerKind::kl_uniform:
            return log_sum_exp(q_values, tau) - tau * std::log(static_cast<double>(q_values.size()));
        case RegularizerKind::neg_tsallis: {
            if (spec.q != 2.0)
                return detail::conjugate_numeric_or_throw(spec, q_values, tau).value;
            const Distribution pi = detail::tsallis2_policy(spec, q_values, tau);
            double dot = 0.0;
            for (std::size_t a = 0; a < pi.size(); ++a)
                dot += pi[a] * q_values[a];
            return dot - tau * omega(spec, pi);
        }
    }
    return 0.0;
}

/// Maximizing policy of conjugate_value, i.e. its gradient with respect to Q.
inline Distribution conjugate_policy(const RegularizerSpec& spec, std::span<const double> q_values, double tau) {
    detail::require_non_empty(q_values, "conjugate_policy");
    detail::require_positive_temperature(tau, "conjugate_policy");
    switch (spec.kind) {
        case RegularizerKind::neg_entropy:
        case RegularizerKind::kl_uniform: return softmax(q_values, tau);
        case RegularizerKind::neg_tsallis:
            if (spec.q != 2.0)
                return detail::conjugate_numeric_or_throw(spec, q_values, tau).policy;
            return detail::tsallis2_policy(spec, q_values, tau);
    }
    return {};
}

// Target entropy -------------------------------------------------------------

/// Entropy floor alpha H(U) + (1 - alpha) H(V) for the temperature controller.
struct TargetEntropySpec {
    double alpha = 1.0;
    double min_entropy = 0.0;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw std::invalid_argument("target entropy: alpha must lie in [0, 1]");
        if (!(min_entropy >= 0.0))
            throw std::invalid_argument("target entropy: min_entropy must be non-negative");
    }
};

inline double target_entropy(const TargetEntropySpec& t, std::size_t n) {
    t.validate();
    if (n == 0)
        throw std::invalid_argument("target_entropy: n must be positive");
    return t.alpha * std::log(static_cast<double>(n)) + (1.0 - t.alpha) * t.min_entropy;
}

}  // namespace decoupled
