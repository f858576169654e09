#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace vtrig {

// Flat key/value experiment configuration. Two on-disk forms parse to the
// same map: a TOML-style subset (comments, [section] headers one level deep,
// key = value with bools/ints/floats/"strings"/homogeneous arrays) and JSON
// objects nested at most one level. Section names join keys with a dot:
// [synth] period_samples -> "synth.period_samples".
class KeyValueConfig {
public:
  using Value = std::variant<bool, std::int64_t, double, std::string,
                             std::vector<double>, std::vector<std::string>>;

  static KeyValueConfig from_file(const std::filesystem::path& path);
  static KeyValueConfig from_toml_text(std::string_view text,
                                       const std::string& origin = "<toml>");
  static KeyValueConfig from_json_text(std::string_view text,
                                       const std::string& origin = "<json>");

  bool has(const std::string& key) const;

  // Typed getters; the get_* forms take a fallback, the require_* forms
  // throw ConfigError naming the missing or mistyped key.
  bool get_bool(const std::string& key, bool fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_number(const std::string& key, double fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_number_array(const std::string& key,
                                       std::vector<double> fallback) const;

  std::int64_t require_int(const std::string& key) const;
  double require_number(const std::string& key) const;
  std::string require_string(const std::string& key) const;

  const std::map<std::string, Value>& entries() const { return entries_; }
  void set(const std::string& key, Value v) { entries_[key] = std::move(v); }

  // Raw text the config was parsed from (hashed into run manifests).
  const std::string& raw_text() const { return raw_text_; }

private:
  std::map<std::string, Value> entries_;
  std::string raw_text_;
  std::string origin_;

  const Value* find(const std::string& key) const;
  [[noreturn]] void type_error(const std::string& key, const char* want) const;
};

// FNV-1a over the raw config bytes; recorded in manifests so a rerun can be
// checked against the exact recipe that produced it.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace vtrig
