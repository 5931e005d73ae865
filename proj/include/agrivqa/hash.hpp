#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace agrivqa {

/// SHA-256 hex digest. Used for image references, prompt fingerprints, and
/// every cache-key component; deterministic and collision-resistant.
std::string content_hash(std::string_view bytes);

/// Digest over an ordered list of parts with unambiguous framing
/// (length-prefixed), so ("ab","c") and ("a","bc") differ.
std::string content_hash_parts(const std::vector<std::string>& parts);

}  // namespace agrivqa
