#pragma once

#include <filesystem>
#include <functional>
#include <ostream>
#include <string>

namespace stfv {

/// Shortest-round-trip-safe text for doubles: 17 significant digits ("%.17g").
std::string fmt17(double x);

/// Writes `body` into a temporary sibling and renames it onto `path`.
void write_file_atomically(const std::filesystem::path& path,
                           const std::function<void(std::ostream&)>& body);

}  // namespace stfv
