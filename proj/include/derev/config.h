#pragma once

#include <map>
#include <string>
#include <vector>

namespace derev::io {

// Plain `key = value` configuration with dotted section keys
// (e.g. fdlp.lp_order, train.lambda). Unknown keys are rejected with the
// offending line number. CLI flags override file values which override the
// built-in defaults.
class CliConfig {
 public:
  CliConfig();  // defaults only

  // merges the file over the defaults
  void load_file(const std::string& path);

  // highest precedence; key must be known
  void set_override(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  unsigned long long get_u64(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;  // comma separated

  struct KeyInfo {
    std::string key;
    std::string default_value;
    std::string help;
  };
  static const std::vector<KeyInfo>& known_keys();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace derev::io
