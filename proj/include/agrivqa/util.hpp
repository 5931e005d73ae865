#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace agrivqa {

std::string read_file(const std::filesystem::path& path);
std::optional<std::string> try_read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file + rename so readers never observe a
/// partially written document.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

void append_line(const std::filesystem::path& path, const std::string& line);

std::vector<std::string> read_lines(const std::filesystem::path& path);

std::string to_lower(std::string s);
std::string trim(const std::string& s);

/// Lowercased alphanumeric word tokens; every other byte is a separator.
/// Shared by the keyword matcher and the leakage guard so "whole word"
/// means the same thing in both.
std::vector<std::string> word_tokens(const std::string& text);

/// True when `phrase`'s tokens occur as a contiguous run in `text`'s tokens.
bool contains_phrase(const std::vector<std::string>& text_tokens,
                     const std::vector<std::string>& phrase_tokens);

std::string base64_encode(const std::string& bytes);
std::optional<std::string> base64_decode(const std::string& encoded);

/// splitmix64: tiny deterministic PRNG, stable across platforms.
struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    /// Uniform value in [0, bound) via rejection sampling.
    std::uint64_t bounded(std::uint64_t bound);
};

/// Seeded Fisher-Yates; deterministic for a given (size, seed) everywhere.
std::vector<std::size_t> shuffled_indices(std::size_t size, std::uint64_t seed);

/// 1-based line number of a byte offset inside text (for parse errors).
std::size_t line_of_offset(const std::string& text, std::size_t byte_offset);

nlohmann::json parse_json_file(const std::filesystem::path& path,
                               const std::string& what);

std::string utc_timestamp_compact();

}  // namespace agrivqa
