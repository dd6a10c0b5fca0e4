#include "derev/config.h"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace derev::io {

const std::vector<CliConfig::KeyInfo>& CliConfig::known_keys() {
  static const std::vector<KeyInfo> keys = {
      {"fdlp.lp_order", "30", "AR model order per band per 1-s segment"},
      {"dplstm.hidden_size", "64", "LSTM hidden units per direction"},
      {"dplstm.fusion_layers", "2", "depth of the bidirectional fusion stack"},
      {"train.lambda", "0.6", "envelope-loss weight in [0,1]"},
      {"train.learning_rate", "1e-3", "Adam step size"},
      {"train.epochs", "20", "training epochs"},
      {"train.batch_size", "16", "minibatch size"},
      {"train.seed", "1234", "RNG seed for init/shuffle"},
      {"roomsim.t60_set", "0.2,0.4,0.6,0.8", "comma-separated T60 values (s)"},
      {"roomsim.snr_db", "20", "additive-noise SNR for reverberant pairs (dB)"},
      {"roomsim.rir_length", "1.0", "simulated RIR length (s)"},
      {"roomsim.seed", "1", "base seed for RIR/noise generation"},
  };
  return keys;
}

namespace {

bool known(const std::string& key) {
  for (const auto& k : CliConfig::known_keys())
    if (k.key == key) return true;
  return false;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

CliConfig::CliConfig() {
  for (const auto& k : known_keys()) values_[k.key] = k.default_value;
}

void CliConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing-file: cannot open config " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("bad-format: " + path + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (!known(key))
      throw std::runtime_error("bad-format: " + path + ":" + std::to_string(lineno) +
                               ": unknown key '" + key + "'");
    values_[key] = value;
  }
}

void CliConfig::set_override(const std::string& key, const std::string& value) {
  if (!known(key))
    throw std::invalid_argument("invalid-argument: unknown config key '" + key + "'");
  values_[key] = value;
}

std::string CliConfig::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end())
    throw std::invalid_argument("invalid-argument: unknown config key '" + key + "'");
  return it->second;
}

double CliConfig::get_double(const std::string& key) const {
  const std::string s = get_string(key);
  size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size())
    throw std::runtime_error("bad-format: config key " + key + " is not a number: '" + s + "'");
  return v;
}

int CliConfig::get_int(const std::string& key) const {
  const double v = get_double(key);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    throw std::runtime_error("bad-format: config key " + key + " is not an integer");
  return i;
}

unsigned long long CliConfig::get_u64(const std::string& key) const {
  const std::string s = get_string(key);
  size_t pos = 0;
  const unsigned long long v = std::stoull(s, &pos);
  if (pos != s.size())
    throw std::runtime_error("bad-format: config key " + key + " is not an unsigned integer");
  return v;
}

std::vector<double> CliConfig::get_double_list(const std::string& key) const {
  const std::string s = get_string(key);
  std::vector<double> out;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(std::stod(trim(item)));
  }
  if (out.empty())
    throw std::runtime_error("bad-format: config key " + key + " has no values");
  return out;
}

}  // namespace derev::io
