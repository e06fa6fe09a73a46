// Flat key-value config files: `dotted.key_with_units = value`, '#' comments,
// required `schema_version` at the top. See README for the full format.
#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bimodal {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class KeyValueFile {
 public:
  static KeyValueFile parse_file(const std::string& path);
  static KeyValueFile parse_text(const std::string& text,
                                 const std::string& origin = "<string>");

  // Dotted-key overrides, e.g. "control.contact.pressure_threshold_pa=1e9".
  void apply_override(const std::string& key_equals_value);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  double require_double(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Keys present in the file but never read by any getter. Used to reject
  // typos and unknown overrides after a full load.
  std::vector<std::string> unread_keys() const;

  int line_of(const std::string& key) const;  // 0 if unknown
  const std::string& origin() const { return origin_; }

  // Keys in file order (for canonical re-serialization in tests/tools).
  std::vector<std::pair<std::string, std::string>> entries() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool read = false;
  };
  std::string origin_;
  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;

  const Entry* find(const std::string& key) const;
  double parse_double(const std::string& key, const Entry& e) const;
};

}  // namespace bimodal
