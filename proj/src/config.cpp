#include "thz/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace thz {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = lower(text);
  if (t == "inf" || t == "+inf") return INFINITY;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || *end != '\0' || std::isnan(v))
    throw ConfigError("config key '" + key + "' expects a number, got '" + text + "'");
  return v;
}

}  // namespace

Config Config::parse(std::istream& in, const std::string& source) {
  Config c;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(n) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(n) + ": empty key");
    if (c.has(key)) throw ConfigError(source + ":" + std::to_string(n) + ": duplicate key '" + key + "'");
    c.values_[key] = trim(line.substr(eq + 1));
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  return parse(f, path);
}

void Config::set(const std::string& key, const std::string& value) {
  const std::string k = trim(key);
  if (k.empty()) throw ConfigError("empty config key");
  values_[k] = trim(value);
}

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

const std::string& Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

std::string Config::get_or(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key) const { return to_double(key, get(key)); }

std::size_t Config::get_size(const std::string& key) const {
  const std::string& t = get(key);
  char* end = nullptr;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || *end != '\0' || v < 0)
    throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + t + "'");
  return static_cast<std::size_t>(v);
}

bool Config::get_bool(const std::string& key) const {
  const std::string t = lower(get(key));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("config key '" + key + "' expects true or false, got '" + get(key) + "'");
}

std::optional<double> Config::get_auto_double(const std::string& key) const {
  const std::string t = lower(get(key));
  if (t == "auto" || t == "none") return std::nullopt;
  return to_double(key, get(key));
}

std::vector<std::string> Config::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> Config::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : get_list(key)) out.push_back(to_double(key, s));
  return out;
}

std::vector<std::string> Config::keys() const {
  std::vector<std::string> k;
  for (const auto& [key, _] : values_) k.push_back(key);
  return k;
}

void Config::check_known(const std::vector<std::string>& known) const {
  for (const auto& [key, _] : values_)
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace thz
