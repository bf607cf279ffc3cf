#pragma once

// "key = value" text blocks with '#' comments. Used for calibration blocks,
// scenario files, capture sidecars and run manifests.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace qadapose {

class KeyValues {
 public:
  KeyValues() = default;

  /// Parses text; `source` names the origin in error messages.
  static KeyValues parse(const std::string& text, const std::string& source = "<text>");
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& key) const;

  std::optional<std::string> find(const std::string& key) const;

  /// Keys that were never read through a getter.
  std::vector<std::string> unread() const;
  /// Throws a config error naming the first unread key.
  void reject_unknown() const;

  const std::vector<std::string>& keys() const { return order_; }
  std::string serialize() const;

 private:
  std::string source_;
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
  mutable std::set<std::string> read_;
};

/// Round-trip exact decimal formatting of a double.
std::string format_double(double v);

/// Writes `contents` to `path` via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace qadapose
