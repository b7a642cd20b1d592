#pragma once

// Plain-text configuration with optional [section] headers:
//
//   [train]
//   batch_size = 20
//   learning_rate = 0.0002
//
// Keys are addressed as "section.key". Values are read on demand; any key
// that was never read can be reported so typos do not pass silently.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace aerodepth::config {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& origin = "<config>");
  static KeyValueConfig read(const std::filesystem::path& path);

  /// Applies "section.key=value" overrides on top of the file contents.
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  bool contains(const std::string& key) const;
  std::optional<std::string> raw(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated numbers.
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback) const;

  /// Keys present in the file or overrides that no getter asked for.
  std::vector<std::string> unused_keys() const;
  /// Throws ConfigError listing unused keys, if any.
  void reject_unused() const;

  const std::map<std::string, std::string>& values() const { return values_; }

  /// Serialises all values back into sectioned form.
  std::string dump() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace aerodepth::config
