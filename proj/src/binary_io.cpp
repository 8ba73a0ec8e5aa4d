#include "binary_io.hpp"

#include "rstcoref/io.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>

namespace rstcoref::detail {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::string& path, const std::vector<unsigned char>& data) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw std::runtime_error("write failed: " + tmp);
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace rstcoref::detail

namespace rstcoref {

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  detail::write_file_atomic(path.string(), std::vector<unsigned char>(text.begin(), text.end()));
}

}  // namespace rstcoref
