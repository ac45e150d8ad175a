#pragma once

// Flat key = value configuration used by layouts and experiments. Lines
// starting with '#' are comments; later keys override earlier ones.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dreamlab/errors.hpp"

namespace dreamlab {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, const std::string& source = "<string>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }
  // Keys in `other` win.
  void merge(const KeyValueConfig& other);

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  long long get_int64(const std::string& key, long long fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Whitespace- or comma-separated integers.
  std::vector<int> get_ints(const std::string& key) const;
  // Points written "x,y" separated by whitespace or ';'.
  std::vector<std::pair<int, int>> get_points(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  // Canonical "key = value" lines in key order.
  std::string to_string() const;

 private:
  std::map<std::string, std::string> entries_;
  std::string source_;
};

}  // namespace dreamlab
