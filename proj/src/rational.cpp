#include "msc/rational.hpp"

#include "msc/errors.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <string>

namespace msc {

std::optional<Rational> exact_fraction(double x, long long max_denominator) {
    if (!std::isfinite(x)) return std::nullopt;
    // Convergents h/k of the continued fraction of x.
    long long h_prev = 1, h = static_cast<long long>(std::floor(x));
    long long k_prev = 0, k = 1;
    if (std::abs(x) > 1e15) return std::nullopt;
    double frac = x - std::floor(x);
    for (int iter = 0; iter < 64; ++iter) {
        if (static_cast<double>(h) / static_cast<double>(k) == x) return Rational(h, k);
        if (frac == 0.0) break;
        const double inv = 1.0 / frac;
        const auto a = static_cast<long long>(std::floor(inv));
        frac = inv - std::floor(inv);
        const long long h_next = a * h + h_prev;
        const long long k_next = a * k + k_prev;
        if (k_next > max_denominator || k_next <= 0) break;
        h_prev = h;
        h = h_next;
        k_prev = k;
        k = k_next;
    }
    return std::nullopt;
}

double parse_number(std::string_view text) {
    auto parse_plain = [&](std::string_view s) {
        double v = 0.0;
        const auto* end = s.data() + s.size();
        const auto [ptr, ec] = std::from_chars(s.data(), end, v);
        if (ec != std::errc() || ptr != end) throw UsageError(fmt::format("cannot parse number '{}'", text));
        return v;
    };
    if (const auto slash = text.find('/'); slash != std::string_view::npos) {
        const double num = parse_plain(text.substr(0, slash));
        const double den = parse_plain(text.substr(slash + 1));
        if (den == 0.0) throw UsageError(fmt::format("zero denominator in '{}'", text));
        return num / den;
    }
    return parse_plain(text);
}

std::optional<Rational> exact_region_sup(Scheme scheme, const ProblemConstants& c, double theta) {
    const auto L = exact_fraction(c.L);
    const auto mu = exact_fraction(c.mu);
    const auto M = exact_fraction(c.M);
    const auto Mt = exact_fraction(c.M_tilde);
    const auto th = exact_fraction(theta);
    if (!L || !mu || !M || !Mt || !th) return std::nullopt;
    const Rational alpha = 2 * *mu + *L;
    if (alpha >= 0) return std::nullopt;
    const Rational abs_alpha = -alpha;
    const Rational one_minus = 1 - *th;
    const Rational mterm = one_minus * one_minus * *M;
    Rational num = abs_alpha;
    Rational den;
    if (scheme == Scheme::maruyama) {
        den = *th == 1 ? Rational(0) : mterm;
    } else {
        num = 4 * abs_alpha;
        den = *th == 1 ? Rational(3 * *Mt) : Rational(4 * mterm + 3 * *Mt);
    }
    if (den == 0) return std::nullopt;
    return Rational(num / den);
}

std::string format_fraction(const Rational& r) {
    const auto num = boost::multiprecision::numerator(r);
    const auto den = boost::multiprecision::denominator(r);
    if (den == 1) return num.str();
    return num.str() + "/" + den.str();
}

}  // namespace msc
