#include "stfv/csv.hpp"

#include <cstdio>
#include <fstream>

#include "stfv/errors.hpp"

namespace stfv {

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_file_atomically(const std::filesystem::path& path,
                           const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    body(out);
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace stfv
