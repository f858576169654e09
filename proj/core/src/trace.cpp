#include "vtrig/trace.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vtrig/errors.hpp"

namespace vtrig {

namespace {

std::vector<char> read_all_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open trace file: " + path.string());
  in.seekg(0, std::ios::end);
  const std::streamoff len = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<char> bytes(static_cast<std::size_t>(len));
  if (len > 0 && !in.read(bytes.data(), len))
    throw DataError("short read on trace file: " + path.string());
  return bytes;
}

float f32_from_le(const char* p) {
  std::uint32_t u = 0;
  std::memcpy(&u, p, 4);
  if constexpr (std::endian::native == std::endian::big)
    u = __builtin_bswap32(u);
  return std::bit_cast<float>(u);
}

void f32_to_le(float v, char* p) {
  std::uint32_t u = std::bit_cast<std::uint32_t>(v);
  if constexpr (std::endian::native == std::endian::big)
    u = __builtin_bswap32(u);
  std::memcpy(p, &u, 4);
}

}  // namespace

Trace load_iq_trace(const std::filesystem::path& path, const TraceMeta& meta) {
  const auto bytes = read_all_bytes(path);
  if (bytes.size() % 8 != 0)
    throw FormatError("iq file " + path.string() + ": byte length " +
                      std::to_string(bytes.size()) +
                      " is not a multiple of 8 (truncated pair?)");
  const std::size_t n = bytes.size() / 8;
  if (n == 0) throw DataError("iq file " + path.string() + " is empty");

  Trace trace;
  trace.samples.resize(n);
  trace.sample_rate_hz = meta.sample_rate_hz;
  trace.source_id = path.filename().string();
  for (std::size_t i = 0; i < n; ++i) {
    const float re = f32_from_le(bytes.data() + 8 * i);
    const float im = f32_from_le(bytes.data() + 8 * i + 4);
    if (!std::isfinite(re) || !std::isfinite(im))
      throw DataError("iq file " + path.string() +
                      ": non-finite value at sample index " + std::to_string(i));
    trace.samples[i] = std::hypot(static_cast<double>(re), static_cast<double>(im));
  }
  return trace;
}

Trace load_real_trace(const std::filesystem::path& path, const TraceMeta& meta) {
  const auto bytes = read_all_bytes(path);
  if (bytes.size() % 4 != 0)
    throw FormatError("trace file " + path.string() + ": byte length " +
                      std::to_string(bytes.size()) + " is not a multiple of 4");
  const std::size_t n = bytes.size() / 4;
  if (n == 0) throw DataError("trace file " + path.string() + " is empty");

  Trace trace;
  trace.samples.resize(n);
  trace.sample_rate_hz = meta.sample_rate_hz;
  trace.source_id = path.filename().string();
  for (std::size_t i = 0; i < n; ++i) {
    const float v = f32_from_le(bytes.data() + 4 * i);
    if (!std::isfinite(v))
      throw DataError("trace file " + path.string() +
                      ": non-finite value at sample index " + std::to_string(i));
    trace.samples[i] = v;
  }
  return trace;
}

void save_real_trace(const Trace& trace, const std::filesystem::path& path) {
  std::vector<char> bytes(trace.samples.size() * 4);
  for (std::size_t i = 0; i < trace.samples.size(); ++i)
    f32_to_le(static_cast<float>(trace.samples[i]), bytes.data() + 4 * i);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

std::filesystem::path meta_sidecar_path(const std::filesystem::path& trace_path) {
  return std::filesystem::path(trace_path.string() + ".meta.json");
}

TraceMeta read_meta_sidecar(const std::filesystem::path& trace_path) {
  const auto sidecar = meta_sidecar_path(trace_path);
  std::ifstream in(sidecar);
  if (!in)
    throw ConfigError("missing metadata sidecar: " + sidecar.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed sidecar " + sidecar.string() + ": " + e.what());
  }
  if (!j.contains("sample_rate_hz") || !j["sample_rate_hz"].is_number())
    throw ConfigError("sidecar " + sidecar.string() +
                      ": required numeric key sample_rate_hz missing");
  TraceMeta meta;
  meta.sample_rate_hz = j["sample_rate_hz"].get<double>();
  if (meta.sample_rate_hz <= 0.0)
    throw ConfigError("sidecar " + sidecar.string() + ": sample_rate_hz must be > 0");
  if (j.contains("center_freq_hz") && j["center_freq_hz"].is_number())
    meta.center_freq_hz = j["center_freq_hz"].get<double>();
  if (j.contains("notes") && j["notes"].is_string())
    meta.notes = j["notes"].get<std::string>();
  return meta;
}

void write_meta_sidecar(const std::filesystem::path& trace_path,
                        const TraceMeta& meta) {
  nlohmann::json j;
  j["sample_rate_hz"] = meta.sample_rate_hz;
  if (meta.center_freq_hz) j["center_freq_hz"] = *meta.center_freq_hz;
  if (!meta.notes.empty()) j["notes"] = meta.notes;
  const auto sidecar = meta_sidecar_path(trace_path);
  std::ofstream out(sidecar, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + sidecar.string());
  out << j.dump(2) << "\n";
}

void save_segment_matrix(const SegmentMatrix& m,
                         const std::filesystem::path& path) {
  std::vector<char> bytes(m.rows() * m.width() * 4);
  std::size_t pos = 0;
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (double v : m.row(r)) {
      f32_to_le(static_cast<float>(v), bytes.data() + pos);
      pos += 4;
    }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());

  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.width();
  j["dtype"] = "float32";
  j["origin_offsets"] = m.origin_offsets;
  std::ofstream meta(path.string() + ".meta.json", std::ios::trunc);
  meta << j.dump(2) << "\n";
}

SegmentMatrix load_segment_matrix(const std::filesystem::path& path) {
  std::ifstream meta_in(path.string() + ".meta.json");
  if (!meta_in)
    throw ConfigError("missing matrix sidecar: " + path.string() + ".meta.json");
  nlohmann::json j;
  try {
    meta_in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed matrix sidecar for " + path.string() + ": " +
                      e.what());
  }
  if (!j.contains("rows") || !j.contains("cols"))
    throw ConfigError("matrix sidecar for " + path.string() +
                      " lacks rows/cols");
  const std::size_t rows = j["rows"].get<std::size_t>();
  const std::size_t cols = j["cols"].get<std::size_t>();

  const auto bytes = read_all_bytes(path);
  if (bytes.size() != rows * cols * 4)
    throw FormatError("matrix file " + path.string() + ": expected " +
                      std::to_string(rows * cols * 4) + " bytes, found " +
                      std::to_string(bytes.size()));
  SegmentMatrix m(rows, cols);
  std::size_t pos = 0;
  for (std::size_t r = 0; r < rows; ++r)
    for (double& v : m.row(r)) {
      v = f32_from_le(bytes.data() + pos);
      pos += 4;
    }
  if (j.contains("origin_offsets"))
    m.origin_offsets = j["origin_offsets"].get<std::vector<std::size_t>>();
  return m;
}

}  // namespace vtrig
