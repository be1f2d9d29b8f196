#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "onco/errors.hpp"

namespace onco {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read file: " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// Writes via a temp file in the same directory, then renames over the
// destination. A failed writer never leaves a partial output file behind.
inline void atomic_write(const std::filesystem::path& path,
                         const std::function<void(std::ostream&)>& writer) {
  namespace fs = std::filesystem;
  fs::path dir = path.parent_path();
  if (!dir.empty()) {
    std::error_code ec;
    fs::create_directories(dir, ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write file: " + tmp.string());
    try {
      writer(out);
    } catch (...) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw;
    }
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw io_error("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw io_error("rename failed for " + path.string());
  }
}

inline void atomic_write_text(const std::filesystem::path& path, const std::string& text) {
  atomic_write(path, [&](std::ostream& out) { out << text; });
}

// Calls fn(line, line_number) per line; line numbers start at 1.
inline void for_each_line(const std::filesystem::path& path,
                          const std::function<void(const std::string&, size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read file: " + path.string());
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    fn(line, lineno);
  }
}

}  // namespace onco
