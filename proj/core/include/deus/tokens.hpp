#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace deus {

// Pre-tokenized input: the toy corpus is plain integers, no tokenizer ships
// with the toolkit.
struct TokenSequence {
  std::vector<std::uint32_t> ids;

  std::size_t size() const { return ids.size(); }
};

// Newline-separated unsigned integers. Rejects empty files and non-numeric
// content; range vs. vocab is checked at forward time.
TokenSequence read_tokens(const std::filesystem::path& path);
void write_tokens(const std::filesystem::path& path, const TokenSequence& tokens);

}  // namespace deus
