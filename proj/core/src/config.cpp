#include "vtrig/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vtrig/errors.hpp"

namespace vtrig {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

bool parse_int(std::string_view s, std::int64_t& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && s.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool parse_double(std::string_view s, double& out) {
  // from_chars for double is fine on gcc 11
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && s.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

KeyValueConfig::Value parse_scalar(std::string_view tok, const std::string& origin,
                                   std::size_t line_no) {
  tok = trim(tok);
  if (tok.empty())
    throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty value");
  if (tok == "true") return true;
  if (tok == "false") return false;
  if (tok.front() == '"') {
    if (tok.size() < 2 || tok.back() != '"')
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": unterminated string");
    return std::string(tok.substr(1, tok.size() - 2));
  }
  std::int64_t i;
  if (parse_int(tok, i)) return i;
  double d;
  if (parse_double(tok, d)) return d;
  throw ConfigError(origin + ":" + std::to_string(line_no) +
                    ": cannot parse value '" + std::string(tok) + "'");
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

KeyValueConfig KeyValueConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  // sniff: a JSON config starts with '{'
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    if (c == '{') return from_json_text(text, path.string());
    break;
  }
  return from_toml_text(text, path.string());
}

KeyValueConfig KeyValueConfig::from_toml_text(std::string_view text,
                                              const std::string& origin) {
  KeyValueConfig cfg;
  cfg.raw_text_ = std::string(text);
  cfg.origin_ = origin;

  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    // strip comments outside of strings
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_str = !in_str;
      if (line[i] == '#' && !in_str) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(line_no) +
                          ": malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty())
        throw ConfigError(origin + ":" + std::to_string(line_no) +
                          ": empty section name");
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected key = value");
    std::string key(trim(line.substr(0, eq)));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    if (!section.empty()) key = section + "." + key;

    std::string_view value = trim(line.substr(eq + 1));
    if (!value.empty() && value.front() == '[') {
      if (value.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(line_no) +
                          ": unterminated array");
      std::string_view body = trim(value.substr(1, value.size() - 2));
      std::vector<double> nums;
      std::vector<std::string> strs;
      bool any_string = false;
      while (!body.empty()) {
        std::size_t comma = body.find(',');
        std::string_view tok = body.substr(0, comma);
        body = comma == std::string_view::npos ? std::string_view{}
                                               : trim(body.substr(comma + 1));
        auto v = parse_scalar(tok, origin, line_no);
        if (std::holds_alternative<std::string>(v)) {
          any_string = true;
          strs.push_back(std::get<std::string>(v));
        } else if (std::holds_alternative<std::int64_t>(v)) {
          nums.push_back(double(std::get<std::int64_t>(v)));
        } else if (std::holds_alternative<double>(v)) {
          nums.push_back(std::get<double>(v));
        } else {
          throw ConfigError(origin + ":" + std::to_string(line_no) +
                            ": unsupported array element");
        }
      }
      if (any_string && !nums.empty())
        throw ConfigError(origin + ":" + std::to_string(line_no) +
                          ": mixed array types");
      if (any_string)
        cfg.entries_[key] = strs;
      else
        cfg.entries_[key] = nums;
      continue;
    }
    cfg.entries_[key] = parse_scalar(value, origin, line_no);
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::from_json_text(std::string_view text,
                                              const std::string& origin) {
  KeyValueConfig cfg;
  cfg.raw_text_ = std::string(text);
  cfg.origin_ = origin;

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(origin + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError(origin + ": top level must be an object");

  auto add = [&](const std::string& key, const nlohmann::json& v) {
    if (v.is_boolean())
      cfg.entries_[key] = v.get<bool>();
    else if (v.is_number_integer())
      cfg.entries_[key] = v.get<std::int64_t>();
    else if (v.is_number())
      cfg.entries_[key] = v.get<double>();
    else if (v.is_string())
      cfg.entries_[key] = v.get<std::string>();
    else if (v.is_array()) {
      std::vector<double> nums;
      std::vector<std::string> strs;
      for (const auto& e : v) {
        if (e.is_number())
          nums.push_back(e.get<double>());
        else if (e.is_string())
          strs.push_back(e.get<std::string>());
        else
          throw ConfigError(origin + ": array '" + key +
                            "' must hold numbers or strings");
      }
      if (!strs.empty() && !nums.empty())
        throw ConfigError(origin + ": mixed array types in '" + key + "'");
      if (!strs.empty())
        cfg.entries_[key] = strs;
      else
        cfg.entries_[key] = nums;
    } else {
      throw ConfigError(origin + ": unsupported value type for '" + key + "'");
    }
  };

  for (const auto& [key, value] : j.items()) {
    if (value.is_object()) {
      for (const auto& [sub, subval] : value.items()) {
        if (subval.is_object())
          throw ConfigError(origin + ": nesting deeper than one level at '" +
                            key + "." + sub + "'");
        add(key + "." + sub, subval);
      }
    } else {
      add(key, value);
    }
  }
  return cfg;
}

bool KeyValueConfig::has(const std::string& key) const {
  return entries_.count(key) != 0;
}

const KeyValueConfig::Value* KeyValueConfig::find(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void KeyValueConfig::type_error(const std::string& key, const char* want) const {
  throw ConfigError(origin_ + ": key '" + key + "' is not a " + want);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (const bool* b = std::get_if<bool>(v)) return *b;
  type_error(key, "bool");
}

std::int64_t KeyValueConfig::get_int(const std::string& key,
                                     std::int64_t fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (const auto* i = std::get_if<std::int64_t>(v)) return *i;
  type_error(key, "integer");
}

double KeyValueConfig::get_number(const std::string& key, double fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (const auto* i = std::get_if<std::int64_t>(v)) return double(*i);
  if (const auto* d = std::get_if<double>(v)) return *d;
  type_error(key, "number");
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (const auto* s = std::get_if<std::string>(v)) return *s;
  type_error(key, "string");
}

std::vector<double> KeyValueConfig::get_number_array(
    const std::string& key, std::vector<double> fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (const auto* a = std::get_if<std::vector<double>>(v)) return *a;
  // single numbers promote to one-element arrays
  if (const auto* i = std::get_if<std::int64_t>(v)) return {double(*i)};
  if (const auto* d = std::get_if<double>(v)) return {*d};
  type_error(key, "number array");
}

std::int64_t KeyValueConfig::require_int(const std::string& key) const {
  if (!has(key)) throw ConfigError(origin_ + ": missing required key '" + key + "'");
  return get_int(key, 0);
}

double KeyValueConfig::require_number(const std::string& key) const {
  if (!has(key)) throw ConfigError(origin_ + ": missing required key '" + key + "'");
  return get_number(key, 0.0);
}

std::string KeyValueConfig::require_string(const std::string& key) const {
  if (!has(key)) throw ConfigError(origin_ + ": missing required key '" + key + "'");
  return get_string(key, "");
}

}  // namespace vtrig
