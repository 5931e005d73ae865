#include "agrivqa/score.hpp"

#include <cctype>
#include <cstdlib>

namespace agrivqa {

std::optional<Score> Score::parse(std::string_view text) {
    size_t begin = 0, end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    if (begin == end) return std::nullopt;

    std::int64_t whole = 0;
    size_t i = begin;
    bool any_digit = false;
    for (; i < end && std::isdigit(static_cast<unsigned char>(text[i])); ++i) {
        whole = whole * 10 + (text[i] - '0');
        any_digit = true;
    }
    if (!any_digit) return std::nullopt;

    std::int64_t tenths = whole * 10;
    if (i < end && text[i] == '.') {
        ++i;
        if (i >= end || !std::isdigit(static_cast<unsigned char>(text[i]))) return std::nullopt;
        tenths += text[i] - '0';
        ++i;
        // Round half-up on the second decimal; further digits only matter
        // for the tie so anything >= 5 bumps the tenth.
        if (i < end && std::isdigit(static_cast<unsigned char>(text[i]))) {
            if (text[i] - '0' >= 5) ++tenths;
            ++i;
            while (i < end && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
        }
    }
    if (i != end) return std::nullopt;
    return Score::from_tenths(tenths);
}

std::string Score::str() const {
    std::int64_t t = tenths_;
    std::string sign;
    if (t < 0) {
        sign = "-";
        t = -t;
    }
    return sign + std::to_string(t / 10) + "." + std::to_string(t % 10);
}

Score Score::mean_half_up(std::span<const Score> scores) {
    if (scores.empty()) return Score::from_tenths(0);
    std::int64_t sum = 0;
    for (const Score& s : scores) sum += s.tenths();
    const auto n = static_cast<std::int64_t>(scores.size());
    return Score::from_tenths(round_half_up(sum, n));
}

std::int64_t round_half_up(std::int64_t numerator, std::int64_t denominator) {
    return (2 * numerator + denominator) / (2 * denominator);
}

std::string format_percent(std::int64_t hits, std::int64_t total) {
    const std::int64_t hundredths = round_half_up(10000 * hits, total);
    std::string frac = std::to_string(hundredths % 100);
    if (frac.size() < 2) frac = "0" + frac;
    return std::to_string(hundredths / 100) + "." + frac;
}

}  // namespace agrivqa
