#include "morseuq/grid_io.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace morseuq {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "GRD1 payload is little-endian; big-endian hosts need byte swapping");

std::string header_line(const Shape& s, const char* dtype) {
  json h;
  h["magic"] = "GRD1";
  h["dims"] = s.dims();
  h["dtype"] = dtype;
  return h.dump() + "\n";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw GridIoError(GridIoErrc::open_failed, "path", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw GridIoError(GridIoErrc::open_failed, "path", "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// PNM header tokens are separated by whitespace; '#' starts a comment.
struct PnmReader {
  std::string_view bytes;
  std::size_t pos = 0;

  int next_int(const char* field) {
    while (pos < bytes.size()) {
      const char ch = bytes[pos];
      if (ch == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos;
      } else {
        break;
      }
    }
    int value = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      value = value * 10 + (bytes[pos] - '0');
      ++pos;
      any = true;
    }
    if (!any) throw GridIoError(GridIoErrc::bad_pnm, field, std::string("pnm: bad ") + field);
    return value;
  }
};

ScalarGrid decode_pnm(std::string_view bytes) {
  const bool colour = bytes.substr(0, 2) == "P6";
  PnmReader r{bytes, 2};
  const int width = r.next_int("width");
  const int height = r.next_int("height");
  const int maxval = r.next_int("maxval");
  if (width < 1 || height < 1)
    throw GridIoError(GridIoErrc::bad_dims, "dims", "pnm: non-positive dims");
  if (maxval < 1 || maxval > 65535)
    throw GridIoError(GridIoErrc::bad_pnm, "maxval", "pnm: maxval out of range");
  ++r.pos;  // single whitespace before the raster
  const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
  const std::size_t channels = colour ? 3 : 1;
  const Shape shape{height, width};
  const std::size_t need = shape.size() * channels * bytes_per_sample;
  if (r.pos > bytes.size() || bytes.size() - r.pos != need)
    throw GridIoError(GridIoErrc::payload_length_mismatch, "payload",
                      "pnm: payload length mismatch");
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data() + r.pos);
  auto sample = [&](std::size_t k) -> float {
    if (bytes_per_sample == 1) return static_cast<float>(raw[k]);
    return static_cast<float>((raw[2 * k] << 8) | raw[2 * k + 1]);  // PNM 16-bit is big-endian
  };
  ScalarGrid out(shape);
  const float scale = 1.0f / static_cast<float>(maxval);
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (colour) {
      const float lum = 0.299f * sample(3 * i) + 0.587f * sample(3 * i + 1) +
                        0.114f * sample(3 * i + 2);
      out[i] = lum * scale;
    } else {
      out[i] = sample(i) * scale;
    }
  }
  return out;
}

}  // namespace

std::string encode_grd1(const ScalarGrid& g) {
  std::string out = header_line(g.shape(), "f32");
  const std::size_t off = out.size();
  out.resize(off + g.size() * sizeof(float));
  std::memcpy(out.data() + off, g.values().data(), g.size() * sizeof(float));
  return out;
}

std::string encode_grd1(const BinaryGrid& g) {
  std::string out = header_line(g.shape(), "u8");
  out.append(reinterpret_cast<const char*>(g.values().data()), g.size());
  return out;
}

AnyGrid decode_grd1(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos)
    throw GridIoError(GridIoErrc::malformed_header, "header", "grd1: missing header line");
  json h;
  try {
    h = json::parse(bytes.substr(0, nl));
  } catch (const json::exception& e) {
    throw GridIoError(GridIoErrc::malformed_header, "header",
                      std::string("grd1: malformed header: ") + e.what());
  }
  if (!h.is_object() || !h.contains("magic") || h["magic"] != "GRD1")
    throw GridIoError(GridIoErrc::bad_magic, "magic", "grd1: bad magic");
  if (!h.contains("dims") || !h["dims"].is_array())
    throw GridIoError(GridIoErrc::bad_dims, "dims", "grd1: dims missing");
  std::vector<int> dims;
  for (const auto& d : h["dims"]) {
    if (!d.is_number_integer() || d.get<long long>() < 1 || d.get<long long>() > (1 << 20))
      throw GridIoError(GridIoErrc::bad_dims, "dims", "grd1: dims must be positive integers");
    dims.push_back(d.get<int>());
  }
  if (dims.size() != 2 && dims.size() != 3)
    throw GridIoError(GridIoErrc::bad_dims, "dims", "grd1: dims must have rank 2 or 3");
  if (!h.contains("dtype") || !h["dtype"].is_string())
    throw GridIoError(GridIoErrc::unsupported_dtype, "dtype", "grd1: dtype missing");
  const std::string dtype = h["dtype"];
  const Shape shape{std::span<const int>(dims)};
  const std::string_view payload = bytes.substr(nl + 1);
  if (dtype == "f32") {
    if (payload.size() != shape.size() * sizeof(float))
      throw GridIoError(GridIoErrc::payload_length_mismatch, "payload",
                        "grd1: payload length mismatch");
    std::vector<float> values(shape.size());
    std::memcpy(values.data(), payload.data(), payload.size());
    return ScalarGrid(shape, std::move(values));
  }
  if (dtype == "u8") {
    if (payload.size() != shape.size())
      throw GridIoError(GridIoErrc::payload_length_mismatch, "payload",
                        "grd1: payload length mismatch");
    std::vector<std::uint8_t> values(payload.begin(), payload.end());
    return BinaryGrid(shape, std::move(values));
  }
  throw GridIoError(GridIoErrc::unsupported_dtype, "dtype", "grd1: unsupported dtype " + dtype);
}

void save_grid(const ScalarGrid& g, const std::filesystem::path& path) {
  write_file(path, encode_grd1(g));
}

void save_grid(const BinaryGrid& g, const std::filesystem::path& path) {
  write_file(path, encode_grd1(g));
}

AnyGrid load_grid(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.rfind("P5", 0) == 0 || bytes.rfind("P6", 0) == 0) return decode_pnm(bytes);
  return decode_grd1(bytes);
}

ScalarGrid load_scalar(const std::filesystem::path& path) {
  AnyGrid g = load_grid(path);
  if (auto* s = std::get_if<ScalarGrid>(&g)) return std::move(*s);
  return to_scalar(std::get<BinaryGrid>(g));
}

BinaryGrid load_binary(const std::filesystem::path& path) {
  AnyGrid g = load_grid(path);
  if (auto* b = std::get_if<BinaryGrid>(&g)) {
    for (auto& v : b->values()) v = v ? 1 : 0;
    return std::move(*b);
  }
  return binarize(std::get<ScalarGrid>(g), 0.5f);
}

std::size_t count_out_of_unit_range(const ScalarGrid& g) {
  std::size_t n = 0;
  for (float v : g.values()) n += (v < 0.0f || v > 1.0f) ? 1 : 0;
  return n;
}

}  // namespace morseuq
