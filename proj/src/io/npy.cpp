#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "labelprop/errors.hpp"
#include "labelprop/io.hpp"

namespace labelprop::io {
namespace {

static_assert(std::endian::native == std::endian::little, "NPY codec assumes a little-endian host");

constexpr std::uint8_t kMagic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
  throw FormatError(origin + ": " + what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\n' || s.back() == ',')) s.remove_suffix(1);
  return s;
}

// Value text following 'key': in the header dict.
std::string_view dict_value(std::string_view header, std::string_view key, const std::string& origin) {
  const std::string quoted = "'" + std::string(key) + "'";
  auto pos = header.find(quoted);
  if (pos == std::string_view::npos) fail(origin, "header is missing '" + std::string(key) + "'");
  pos = header.find(':', pos + quoted.size());
  if (pos == std::string_view::npos) fail(origin, "malformed header entry for '" + std::string(key) + "'");
  std::string_view rest = header.substr(pos + 1);
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  if (rest.empty()) fail(origin, "malformed header entry for '" + std::string(key) + "'");
  std::size_t end = 0;
  if (rest.front() == '\'') {
    end = rest.find('\'', 1);
    if (end == std::string_view::npos) fail(origin, "unterminated string in header");
    return rest.substr(1, end - 1);
  }
  if (rest.front() == '(') {
    end = rest.find(')');
    if (end == std::string_view::npos) fail(origin, "unterminated shape tuple in header");
    return rest.substr(1, end - 1);
  }
  end = rest.find_first_of(",}");
  return trim(rest.substr(0, end));
}

std::vector<std::size_t> parse_shape(std::string_view text, const std::string& origin) {
  std::vector<std::size_t> shape;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto next = text.find(',', pos);
    if (next == std::string_view::npos) next = text.size();
    const auto item = trim(text.substr(pos, next - pos));
    if (!item.empty()) {
      std::size_t v = 0;
      for (char ch : item) {
        if (ch < '0' || ch > '9') fail(origin, "bad shape entry '" + std::string(item) + "'");
        v = v * 10 + static_cast<std::size_t>(ch - '0');
      }
      shape.push_back(v);
    }
    pos = next + 1;
  }
  return shape;
}

std::vector<std::uint8_t> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

NpyArray parse_npy(std::span<const std::uint8_t> bytes, const std::string& origin) {
  if (bytes.size() < 10) fail(origin, "truncated header (file shorter than the NPY preamble)");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) fail(origin, "bad magic bytes, not an NPY file");
  const std::uint8_t major = bytes[6];
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    header_len = static_cast<std::size_t>(bytes[8]) | (static_cast<std::size_t>(bytes[9]) << 8);
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) fail(origin, "truncated header");
    header_len = static_cast<std::size_t>(bytes[8]) | (static_cast<std::size_t>(bytes[9]) << 8) |
                 (static_cast<std::size_t>(bytes[10]) << 16) | (static_cast<std::size_t>(bytes[11]) << 24);
    offset = 12;
  } else {
    fail(origin, "unsupported format version " + std::to_string(major));
  }
  if (bytes.size() < offset + header_len) fail(origin, "truncated header");
  const std::string_view header(reinterpret_cast<const char*>(bytes.data() + offset), header_len);

  const auto descr = dict_value(header, "descr", origin);
  const auto order = dict_value(header, "fortran_order", origin);
  const auto shape = parse_shape(dict_value(header, "shape", origin), origin);
  if (order != "False") fail(origin, "unsupported fortran_order " + std::string(order));

  std::size_t width = 0;
  if (descr == "<f4")
    width = 4;
  else if (descr == "<f8")
    width = 8;
  else
    fail(origin, "unsupported dtype '" + std::string(descr) + "' (need <f4 or <f8)");

  std::size_t count = 1;
  for (auto d : shape) count *= d;
  const std::size_t data_offset = offset + header_len;
  if (bytes.size() - data_offset < count * width)
    fail(origin, "truncated data: expected " + std::to_string(count * width) + " bytes, found " +
                     std::to_string(bytes.size() - data_offset));

  NpyArray out;
  out.shape = shape;
  out.data.resize(count);
  const std::uint8_t* src = bytes.data() + data_offset;
  if (width == 4) {
    std::memcpy(out.data.data(), src, count * 4);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      double v = 0.0;
      std::memcpy(&v, src + i * 8, 8);
      out.data[i] = static_cast<float>(v);
    }
  }
  return out;
}

NpyArray read_npy(const fs::path& path) {
  const auto bytes = slurp(path);
  return parse_npy(bytes, path.string());
}

std::vector<std::uint8_t> encode_npy(std::span<const std::size_t> shape, std::span<const float> data) {
  std::size_t count = 1;
  for (auto d : shape) count *= d;
  if (count != data.size()) throw ConfigError("encode_npy: shape does not match the data size");

  std::ostringstream dict;
  dict << "{'descr': '<f4', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) dict << ", ";
    dict << shape[i];
  }
  if (shape.size() == 1) dict << ",";
  dict << "), }";
  std::string header = dict.str();
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append(64 - unpadded % 64, ' ');
  header.push_back('\n');

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(1);
  out.push_back(0);
  out.push_back(static_cast<std::uint8_t>(header.size() & 0xff));
  out.push_back(static_cast<std::uint8_t>(header.size() >> 8));
  out.insert(out.end(), header.begin(), header.end());
  const auto* raw = reinterpret_cast<const std::uint8_t*>(data.data());
  out.insert(out.end(), raw, raw + data.size() * sizeof(float));
  return out;
}

void write_npy(const fs::path& path, std::span<const std::size_t> shape, std::span<const float> data) {
  const auto bytes = encode_npy(shape, data);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(path.string() + ": write failed");
}

FeatureGrid read_tensor(const fs::path& path) {
  auto arr = read_npy(path);
  if (arr.shape.size() != 3)
    throw FormatError(path.string() + ": expected a rank-3 (C, H, W) tensor, got rank " +
                      std::to_string(arr.shape.size()));
  try {
    return FeatureGrid(arr.shape[0], arr.shape[1], arr.shape[2], std::move(arr.data));
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_tensor(const FeatureGrid& grid, const fs::path& path) {
  const std::size_t shape[3] = {grid.channels(), grid.height(), grid.width()};
  write_npy(path, shape, grid.values());
}

LabelGrid read_scores(const fs::path& path) {
  auto arr = read_npy(path);
  if (arr.shape.size() != 3)
    throw FormatError(path.string() + ": expected a rank-3 (L, H, W) tensor, got rank " +
                      std::to_string(arr.shape.size()));
  try {
    return LabelGrid(arr.shape[0], arr.shape[1], arr.shape[2], std::move(arr.data));
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_scores(const LabelGrid& scores, const fs::path& path) {
  const std::size_t shape[3] = {scores.classes(), scores.height(), scores.width()};
  write_npy(path, shape, scores.scores());
}

}  // namespace labelprop::io
