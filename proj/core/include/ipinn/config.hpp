#pragma once

#include <map>
#include <string>
#include <vector>

#include "ipinn/common.hpp"

namespace ipinn {

// Flat sectioned key-value text format:
//
//   # comment
//   [section]
//   key = value
//
// Keys are unique within a section. Readers mark keys as consumed; finish()
// rejects anything left over so misspelled keys fail loudly.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text, const std::string& name = "<string>");

  bool has(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback);
  std::string require_string(const std::string& section, const std::string& key);
  long long get_int(const std::string& section, const std::string& key, long long fallback);
  double get_double(const std::string& section, const std::string& key, double fallback);
  bool get_bool(const std::string& section, const std::string& key, bool fallback);
  // Whitespace-separated list of integers.
  std::vector<long long> get_ints(const std::string& section, const std::string& key,
                                  std::vector<long long> fallback);

  // Throws ConfigError naming the first unconsumed key and its line.
  void finish() const;

  // 64-bit FNV-1a over the sorted (section, key, value) triples, so the hash
  // is invariant to key and section ordering but changes with any value.
  std::string hash() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
  };

  const Entry* find(const std::string& section, const std::string& key) const;

  std::string name_;
  std::map<std::string, std::map<std::string, Entry>> sections_;
};

}  // namespace ipinn
