#pragma once

// Deterministic text output: CSV tables, JSON documents and the run manifest.
// Floats are written with 17 significant digits so they round-trip exactly.

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace quenched::cli {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::ordered_json;

// "%.17g"; non-finite values print as inf, -inf and nan.
std::string format_double(double v);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

// Serializes with two-space indentation; floats use format_double and
// non-finite floats become strings.
std::string dump(const Json& value);

class Csv {
 public:
  explicit Csv(std::initializer_list<std::string_view> columns);

  Csv& cell(double v);
  Csv& cell(std::int64_t v);
  Csv& cell(int v) { return cell(static_cast<std::int64_t>(v)); }
  Csv& cell(std::uint64_t v);
  Csv& cell(std::string_view v);
  // Terminates the current row; throws std::logic_error on a column count mismatch.
  void end_row();

  const std::string& text() const { return text_; }

 private:
  std::size_t columns_;
  std::size_t filled_ = 0;
  std::string text_;
};

struct WrittenFile {
  std::string name;
  std::uint64_t bytes = 0;
  std::string fnv1a;
};

// Output directory of one run. Every file goes through write() so the manifest
// can list it with its hash.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir);

  void write(const std::string& name, std::string_view content);
  void write_csv(const std::string& name, const Csv& csv) { write(name, csv.text()); }
  void write_json(const std::string& name, const Json& value) { write(name, dump(value)); }

  const std::vector<WrittenFile>& files() const { return files_; }
  const std::filesystem::path& path() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<WrittenFile> files_;
};

}  // namespace quenched::cli
