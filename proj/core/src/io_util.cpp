#include "ipursuit/io_util.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "ipursuit/common.hpp"

namespace ipursuit {

void atomic_write(const std::string& path, const std::function<void(std::ostream&)>& body) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  std::random_device rd;
  const std::string tmp = path + ".tmp" + std::to_string(rd() % 1000000);
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot open " + tmp + " for writing");
    body(out);
    out.flush();
    if (!out) {
      out.close();
      std::remove(tmp.c_str());
      throw RuntimeFailure("write failed for " + path);
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw RuntimeFailure("cannot rename " + tmp + " to " + path + ": " + ec.message());
  }
}

}  // namespace ipursuit
