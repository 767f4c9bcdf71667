#include "deus/tokens.hpp"

#include <fstream>
#include <string>

#include "deus/errors.hpp"

namespace deus {

TokenSequence read_tokens(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open token file: " + path.string());
  TokenSequence out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    // Trim trailing CR and surrounding spaces.
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.pop_back();
    }
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;  // blank line
    line = line.substr(start);
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(line, &used);
      if (used != line.size() || line[0] == '-') throw std::invalid_argument(line);
      out.ids.push_back(static_cast<std::uint32_t>(v));
    } catch (const std::exception&) {
      throw FormatError(FormatError::Fault::BadTokenFile,
                        "bad token at " + path.string() + ":" + std::to_string(lineno) +
                            ": '" + line + "'");
    }
  }
  if (out.ids.empty()) {
    throw FormatError(FormatError::Fault::BadTokenFile, "empty token file: " + path.string());
  }
  return out;
}

void write_tokens(const std::filesystem::path& path, const TokenSequence& tokens) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open for write: " + path.string());
  for (std::uint32_t id : tokens.ids) f << id << "\n";
  if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace deus
