#include "qadapose/keyvalue.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qadapose/errors.hpp"

namespace qadapose {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  if (t == "inf" || t == "+inf") return INFINITY;
  if (t == "-inf") return -INFINITY;
  double v = 0;
  const auto* end = t.data() + t.size();
  const auto res = std::from_chars(t.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end)
    fail(ErrorKind::config, "key '" + key + "': expected a number, got '" + t + "'");
  return v;
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text, const std::string& source) {
  KeyValues kv;
  kv.source_ = source;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::config, source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) fail(ErrorKind::config, source + ":" + std::to_string(lineno) + ": empty key");
    if (kv.has(key)) fail(ErrorKind::config, source + ": duplicate key '" + key + "'");
    kv.set(key, trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

void KeyValues::set(const std::string& key, const std::string& value) {
  if (!has(key)) order_.push_back(key);
  values_[key] = value;
}

std::optional<std::string> KeyValues::find(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  read_.insert(key);
  return it->second;
}

std::string KeyValues::get_string(const std::string& key) const {
  auto v = find(key);
  if (!v) fail(ErrorKind::config, (source_.empty() ? std::string() : source_ + ": ") +
                                      "missing required key '" + key + "'");
  return *v;
}

double KeyValues::get_double(const std::string& key) const {
  return parse_double(get_string(key), key);
}

long long KeyValues::get_int(const std::string& key) const {
  const std::string t = get_string(key);
  long long v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size())
    fail(ErrorKind::config, "key '" + key + "': expected an integer, got '" + t + "'");
  return v;
}

std::uint64_t KeyValues::get_u64(const std::string& key) const {
  const std::string t = get_string(key);
  std::uint64_t v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size())
    fail(ErrorKind::config, "key '" + key + "': expected an unsigned integer, got '" + t + "'");
  return v;
}

std::vector<double> KeyValues::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(get_string(key))) out.push_back(parse_double(item, key));
  return out;
}

std::vector<std::string> KeyValues::get_strings(const std::string& key) const {
  return split_list(get_string(key));
}

std::vector<std::string> KeyValues::unread() const {
  std::vector<std::string> out;
  for (const auto& k : order_)
    if (!read_.count(k)) out.push_back(k);
  return out;
}

void KeyValues::reject_unknown() const {
  const auto extra = unread();
  if (!extra.empty())
    fail(ErrorKind::config, (source_.empty() ? std::string() : source_ + ": ") +
                                "unknown key '" + extra.front() + "'");
}

std::string KeyValues::serialize() const {
  std::string out;
  for (const auto& k : order_) out += k + " = " + values_.at(k) + "\n";
  return out;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot open '" + tmp.string() + "' for writing");
    out << contents;
    if (!out) fail(ErrorKind::io, "failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::io, "cannot rename '" + tmp.string() + "': " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace qadapose
