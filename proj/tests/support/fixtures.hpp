#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "multissl/combine/strategy.hpp"
#include "multissl/scenegen/dataset.hpp"

namespace multissl::testkit {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// The seconds-scale dataset shared by the unit tests, generated once.
const scenegen::Dataset& tiny_dataset();

std::vector<int> iota(int n);

/// Runs a shell command; returns its exit status and captures stdout+stderr.
int run_command(const std::string& command, std::string* output = nullptr);

std::string read_text(const std::filesystem::path& path);

}  // namespace multissl::testkit
