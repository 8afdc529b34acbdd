#ifndef BIBWEAVE_TESTS_TEMP_DIR_HPP
#define BIBWEAVE_TESTS_TEMP_DIR_HPP

#include <filesystem>
#include <random>
#include <string>

namespace testsupport {

/// Unique directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "bibweave") {
    std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }

  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }

  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testsupport

#endif  // BIBWEAVE_TESTS_TEMP_DIR_HPP
