#pragma once

#include "prospect/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace prospect {

/**
 * Monotone scalar function used for utilities, probability weightings and
 * Choquet distortions.
 *
 * Built-in families:
 *  - identity: c(x) = x
 *  - inverse_s: c(p) = p^g / (p^g + (1-p)^g)^(1/g), g > 0 (probability domain)
 *  - power: c(p) = p^k, k > 0 (probability domain)
 *  - table: piecewise-linear through user points, linear extrapolation outside
 *  - custom: arbitrary callable (not serializable)
 */
class Curve {
public:
    enum class Family { identity, inverse_s, power, table, custom };

    static Curve identity() { return Curve(Family::identity, 0.0, {}, {}, "identity"); }

    static Curve inverse_s(double gamma) {
        if (!(gamma > 0.0) || !std::isfinite(gamma))
            throw InvalidInput("inverse-S weighting needs gamma > 0");
        return Curve(Family::inverse_s, gamma, {}, {}, "inverse_s");
    }

    static Curve power(double exponent) {
        if (!(exponent > 0.0) || !std::isfinite(exponent))
            throw InvalidInput("power curve needs a positive exponent");
        return Curve(Family::power, exponent, {}, {}, "power");
    }

    static Curve table(std::vector<std::pair<double, double>> points) {
        if (points.size() < 2) throw InvalidInput("a tabulated curve needs at least two points");
        for (std::size_t i = 1; i < points.size(); ++i)
            if (!(points[i].first > points[i - 1].first))
                throw InvalidInput("tabulated curve abscissae must be strictly increasing");
        for (const auto& [x, y] : points)
            if (!std::isfinite(x) || !std::isfinite(y))
                throw InvalidInput("tabulated curve has a non-finite point");
        return Curve(Family::table, 0.0, std::move(points), {}, "table");
    }

    static Curve custom(std::function<double(double)> fn, std::string label = "custom") {
        if (!fn) throw InvalidInput("custom curve needs a callable");
        return Curve(Family::custom, 0.0, {}, std::move(fn), std::move(label));
    }

    double operator()(double x) const {
        switch (family_) {
        case Family::identity: return x;
        case Family::inverse_s: {
            if (x <= 0.0) return 0.0;
            if (x >= 1.0) return 1.0;
            const double a = std::pow(x, parameter_);
            const double b = std::pow(1.0 - x, parameter_);
            return a / std::pow(a + b, 1.0 / parameter_);
        }
        case Family::power:
            if (x <= 0.0) return 0.0;
            return std::pow(x, parameter_);
        case Family::table: return interpolate(x);
        case Family::custom: return fn_(x);
        }
        return x;
    }

    Family family() const noexcept { return family_; }
    double parameter() const noexcept { return parameter_; }
    const std::vector<std::pair<double, double>>& points() const noexcept { return points_; }
    const std::string& label() const noexcept { return label_; }
    bool is_identity() const noexcept { return family_ == Family::identity; }

private:
    Curve(Family family, double parameter, std::vector<std::pair<double, double>> points,
          std::function<double(double)> fn, std::string label)
        : family_(family), parameter_(parameter), points_(std::move(points)), fn_(std::move(fn)),
          label_(std::move(label)) {}

    double interpolate(double x) const {
        auto hi = std::upper_bound(points_.begin(), points_.end(), x,
                                   [](double value, const auto& p) { return value < p.first; });
        if (hi == points_.begin()) hi = points_.begin() + 1;
        if (hi == points_.end()) hi = points_.end() - 1;
        const auto& [x1, y1] = *hi;
        const auto& [x0, y0] = *(hi - 1);
        if (x == x0) return y0;
        if (x == x1) return y1;
        return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
    }

    Family family_;
    double parameter_;
    std::vector<std::pair<double, double>> points_;
    std::function<double(double)> fn_;
    std::string label_;
};

} // namespace prospect
