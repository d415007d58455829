#include "ipinn/config.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

namespace ipinn {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path);
}

Config Config::parse_string(const std::string& text, const std::string& name) {
  Config cfg;
  cfg.name_ = name;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = name + ":" + std::to_string(line_no);
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (section.empty()) throw ConfigError(where + ": key '" + key + "' before any [section]");
    auto& sec = cfg.sections_[section];
    if (sec.count(key))
      throw ConfigError(where + ": duplicate key '" + key + "' in [" + section + "]");
    sec[key] = Entry{trim(line.substr(eq + 1)), line_no, false};
  }
  return cfg;
}

const Config::Entry* Config::find(const std::string& section, const std::string& key) const {
  const auto sec = sections_.find(section);
  if (sec == sections_.end()) return nullptr;
  const auto it = sec->second.find(key);
  return it == sec->second.end() ? nullptr : &it->second;
}

bool Config::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::string& fallback) {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  e->used = true;
  return e->value;
}

std::string Config::require_string(const std::string& section, const std::string& key) {
  const Entry* e = find(section, key);
  if (!e) throw ConfigError(name_ + ": missing required key '" + key + "' in [" + section + "]");
  e->used = true;
  return e->value;
}

long long Config::get_int(const std::string& section, const std::string& key, long long fallback) {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  e->used = true;
  try {
    size_t pos = 0;
    const long long v = std::stoll(e->value, &pos);
    if (pos != e->value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(name_ + ":" + std::to_string(e->line) + ": '" + key +
                      "' is not an integer: " + e->value);
  }
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  e->used = true;
  try {
    size_t pos = 0;
    const double v = std::stod(e->value, &pos);
    if (pos != e->value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(name_ + ":" + std::to_string(e->line) + ": '" + key +
                      "' is not a number: " + e->value);
  }
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  e->used = true;
  if (e->value == "true" || e->value == "1") return true;
  if (e->value == "false" || e->value == "0") return false;
  throw ConfigError(name_ + ":" + std::to_string(e->line) + ": '" + key +
                    "' must be true/false: " + e->value);
}

std::vector<long long> Config::get_ints(const std::string& section, const std::string& key,
                                        std::vector<long long> fallback) {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  e->used = true;
  std::istringstream in(e->value);
  std::vector<long long> out;
  std::string tok;
  while (in >> tok) {
    try {
      size_t pos = 0;
      out.push_back(std::stoll(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError(name_ + ":" + std::to_string(e->line) + ": '" + key +
                        "' contains a non-integer: " + tok);
    }
  }
  return out;
}

void Config::finish() const {
  for (const auto& [section, entries] : sections_)
    for (const auto& [key, e] : entries)
      if (!e.used)
        throw ConfigError(name_ + ":" + std::to_string(e.line) + ": unknown key '" + key +
                          "' in [" + section + "]");
}

std::string Config::hash() const {
  // std::map keeps the triples sorted, so iteration order is canonical.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const std::string& s) {
    for (const unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0x1f;  // field separator so ("ab","c") != ("a","bc")
    h *= 1099511628211ULL;
  };
  for (const auto& [section, entries] : sections_)
    for (const auto& [key, e] : entries) {
      mix(section);
      mix(key);
      mix(e.value);
    }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ipinn
