#pragma once

#include <string_view>

#include "ragshield/embedding.hpp"

namespace ragshield {

/// Lowercases, splits on Unicode whitespace, strips leading and trailing
/// punctuation from each token and drops tokens that end up empty. Case
/// folding covers ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic;
/// other scripts pass through unchanged. Invalid UTF-8 bytes are kept as-is.
TokenSeq tokenize(std::string_view text, std::string_view source_id = {});

}  // namespace ragshield
