#pragma once

#include <istream>
#include <sstream>
#include <string>

namespace dlab {

/// Copies the remaining stream minus blank-prefixed '#' comment lines, so
/// whitespace-token readers can accept files that carry a config header.
inline std::istringstream strip_comment_lines(std::istream& in) {
  std::string kept;
  for (std::string line; std::getline(in, line);) {
    const auto first = line.find_first_not_of(" \t");
    if (first != std::string::npos && line[first] == '#') continue;
    kept += line;
    kept += '\n';
  }
  return std::istringstream(kept);
}

}  // namespace dlab
