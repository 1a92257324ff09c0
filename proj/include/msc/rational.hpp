#pragma once

#include "msc/integrators.hpp"
#include "msc/sde_model.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <string>
#include <string_view>

namespace msc {

using Rational = boost::multiprecision::cpp_rational;

// Smallest-denominator fraction p/q (q <= max_denominator) whose double value
// equals x exactly, found from the continued-fraction convergents.
std::optional<Rational> exact_fraction(double x, long long max_denominator = 1'000'000);

// Parses a decimal literal or a fraction "p/q". Throws UsageError.
double parse_number(std::string_view text);

// Region supremum in exact arithmetic when every input is an exact fraction.
// Empty result when some input is not, or when the region is empty/unbounded.
std::optional<Rational> exact_region_sup(Scheme scheme, const ProblemConstants& c, double theta);

// "7/4", or "-3" for integers.
std::string format_fraction(const Rational& r);

}  // namespace msc
