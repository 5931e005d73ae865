#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace agrivqa {

/// A judge score carried exactly as tenths (8.5 -> 85 tenths). Judges emit
/// one-decimal values and aggregates must stay drift-free in golden files,
/// so all arithmetic is integral; rounding is half-up at the tenths boundary.
class Score {
public:
    Score() = default;

    static Score from_tenths(std::int64_t tenths) { return Score(tenths); }

    static Score from_int(std::int64_t whole) { return Score(whole * 10); }

    /// Parses "8", "8.5", "8.50", with optional surrounding spaces. Digits
    /// past the first decimal place round half-up into tenths.
    static std::optional<Score> parse(std::string_view text);

    std::int64_t tenths() const { return tenths_; }
    double value() const { return static_cast<double>(tenths_) / 10.0; }

    /// "8.0", "7.5" style rendering (always one decimal).
    std::string str() const;

    bool operator==(const Score&) const = default;
    auto operator<=>(const Score&) const = default;

    Score clamp(Score lo, Score hi) const {
        if (tenths_ < lo.tenths_) return lo;
        if (tenths_ > hi.tenths_) return hi;
        return *this;
    }

    /// Arithmetic mean of non-negative scores, rounded half-up to one
    /// decimal. Exact: (2*sum + n) / (2n) in integer arithmetic.
    static Score mean_half_up(std::span<const Score> scores);

private:
    explicit Score(std::int64_t tenths) : tenths_(tenths) {}
    std::int64_t tenths_ = 0;
};

/// Half-up rounding of the rational numerator/denominator (denominator > 0,
/// numerator >= 0), shared by every aggregation boundary in the project.
std::int64_t round_half_up(std::int64_t numerator, std::int64_t denominator);

/// "65.00"-style percentage with exactly two decimals: 100*hits/total
/// rounded half-up at the hundredths place.
std::string format_percent(std::int64_t hits, std::int64_t total);

}  // namespace agrivqa
