#include "vaporcell/config.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "vaporcell/errors.hpp"
#include "vaporcell/io.hpp"

namespace vaporcell {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& is) {
  KeyValueConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::invalid_argument, "config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) {
      fail(ErrorCode::invalid_argument, "config line " + std::to_string(lineno) + ": empty key");
    }
    cfg.entries_[key] = trim(t.substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::io, "cannot open config file: " + path.string());
  return parse(is);
}

void KeyValueConfig::set(const std::string& key, const std::string& value) { entries_[key] = value; }

void KeyValueConfig::merge(const KeyValueConfig& other) {
  for (const auto& [k, v] : other.entries_) entries_[k] = v;
}

bool KeyValueConfig::contains(const std::string& key) const { return entries_.count(key) != 0; }

std::optional<std::string> KeyValueConfig::find(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  return find(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  try {
    return io::parse_double(*v);
  } catch (const Error&) {
    fail(ErrorCode::invalid_argument, "config key '" + key + "' is not numeric: " + *v);
  }
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    const long long out = std::stoll(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument(*v);
    return out;
  } catch (const std::exception&) {
    fail(ErrorCode::invalid_argument, "config key '" + key + "' is not an integer: " + *v);
  }
}

double KeyValueConfig::require_double(const std::string& key) const {
  if (!contains(key)) fail(ErrorCode::invalid_argument, "missing config key '" + key + "'");
  return get_double(key, 0.0);
}

void Summary::add(const std::string& key, double value) {
  entries_.emplace_back(key, io::format_double(value));
}

void Summary::add(const std::string& key, long long value) {
  entries_.emplace_back(key, std::to_string(value));
}

void Summary::add(const std::string& key, const std::string& value) {
  entries_.emplace_back(key, value);
}

void Summary::write(std::ostream& os) const {
  for (const auto& [k, v] : entries_) os << k << " = " << v << '\n';
}

void Summary::write(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::io, "cannot open summary for writing: " + path.string());
  write(os);
}

}  // namespace vaporcell
