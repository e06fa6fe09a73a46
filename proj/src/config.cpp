#include "bimodal/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace bimodal {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path);
}

KeyValueFile KeyValueFile::parse_text(const std::string& text,
                                      const std::string& origin) {
  KeyValueFile kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::vector<std::string> problems;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string s = trim(line);
    if (s.empty()) continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos) {
      problems.push_back(origin + ":" + std::to_string(lineno) +
                         ": expected `key = value`, got: " + s);
      continue;
    }
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) {
      problems.push_back(origin + ":" + std::to_string(lineno) + ": empty key");
      continue;
    }
    if (kv.entries_.count(key)) {
      problems.push_back(origin + ":" + std::to_string(lineno) +
                         ": duplicate key `" + key + "` (first at line " +
                         std::to_string(kv.entries_[key].line) + ")");
      continue;
    }
    kv.entries_[key] = Entry{value, lineno, false};
    kv.order_.push_back(key);
  }
  if (!problems.empty()) {
    std::string msg = "config parse failed:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  return kv;
}

void KeyValueFile::apply_override(const std::string& kev) {
  size_t eq = kev.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must be KEY=VALUE, got: " + kev);
  std::string key = trim(kev.substr(0, eq));
  std::string value = trim(kev.substr(eq + 1));
  if (key.empty()) throw ConfigError("override has empty key: " + kev);
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    entries_[key] = Entry{value, 0, false};
    order_.push_back(key);
  } else {
    it->second.value = value;
    it->second.read = false;
  }
}

const KeyValueFile::Entry* KeyValueFile::find(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  it->second.read = true;
  return &it->second;
}

bool KeyValueFile::has(const std::string& key) const {
  return entries_.count(key) != 0;
}

std::string KeyValueFile::get_string(const std::string& key,
                                     const std::string& fallback) const {
  const Entry* e = find(key);
  return e ? e->value : fallback;
}

double KeyValueFile::parse_double(const std::string& key, const Entry& e) const {
  const char* begin = e.value.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": key `" + key +
                      "`: not a number: " + e.value);
  return v;
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
  const Entry* e = find(key);
  return e ? parse_double(key, *e) : fallback;
}

double KeyValueFile::require_double(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) throw ConfigError(origin_ + ": missing required key `" + key + "`");
  return parse_double(key, *e);
}

int KeyValueFile::get_int(const std::string& key, int fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  double v = parse_double(key, *e);
  int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    throw ConfigError(origin_ + ":" + std::to_string(e->line) + ": key `" + key +
                      "`: expected integer, got " + e->value);
  return i;
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::string v = e->value;
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(origin_ + ":" + std::to_string(e->line) + ": key `" + key +
                    "`: expected boolean, got " + e->value);
}

std::vector<std::string> KeyValueFile::unread_keys() const {
  std::vector<std::string> out;
  for (const auto& k : order_)
    if (!entries_.at(k).read) out.push_back(k);
  return out;
}

int KeyValueFile::line_of(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? 0 : it->second.line;
}

std::vector<std::pair<std::string, std::string>> KeyValueFile::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(order_.size());
  for (const auto& k : order_) out.emplace_back(k, entries_.at(k).value);
  return out;
}

}  // namespace bimodal
