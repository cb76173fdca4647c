#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>

namespace offpol {

// Neumaier's variant of Kahan summation. Inverse-propensity addends are
// heavy-tailed, so plain accumulation loses the small terms.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            compensation_ += (sum_ - t) + x;
        else
            compensation_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + compensation_; }

private:
    double sum_ = 0.0;
    double compensation_ = 0.0;
};

/// Locale-independent shortest round-trip rendering capped at 17 significant
/// digits. Infinities render as "inf"/"-inf".
std::string format_double(double x);

/// Inverse of format_double; accepts "inf", "-inf" and "nan".
double parse_double(std::string_view text);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Ordinary least squares of y on x. Requires at least two distinct x values.
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

}  // namespace offpol
