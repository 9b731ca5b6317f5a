#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("pairrank_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// One query group of the dataset TSV with the gold passage at `gold`
// (no label column value of 1 when gold < 0).
inline std::string dataset_group(const std::string& qid, const std::string& query, int gold,
                                 std::size_t rows = 10) {
  std::string out;
  for (std::size_t i = 0; i < rows; ++i) {
    out += qid + "\t" + query + "\tpassage number " + std::to_string(i) + " about " + query + "\t" +
           (static_cast<int>(i) == gold ? "1" : "0") + "\t" + std::to_string(i) + "\n";
  }
  return out;
}

}  // namespace testutil
