#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <variant>

#include "morseuq/errors.hpp"
#include "morseuq/grid.hpp"

namespace morseuq {

// GRD1 layout: one JSON header line
//   {"magic":"GRD1","dims":[...],"dtype":"f32"|"u8"}\n
// followed by the little-endian row-major payload.

enum class GridIoErrc {
  open_failed,
  malformed_header,
  bad_magic,
  bad_dims,
  unsupported_dtype,
  payload_length_mismatch,
  bad_pnm,
};

class GridIoError : public DataError {
 public:
  GridIoError(GridIoErrc code, std::string field, const std::string& what)
      : DataError(what), code_(code), field_(std::move(field)) {}

  GridIoErrc code() const { return code_; }
  const std::string& field() const { return field_; }

 private:
  GridIoErrc code_;
  std::string field_;
};

using AnyGrid = std::variant<ScalarGrid, BinaryGrid>;

std::string encode_grd1(const ScalarGrid& g);
std::string encode_grd1(const BinaryGrid& g);
AnyGrid decode_grd1(std::string_view bytes);

void save_grid(const ScalarGrid& g, const std::filesystem::path& path);
void save_grid(const BinaryGrid& g, const std::filesystem::path& path);

// Dispatches on the file magic: GRD1, P5 (grey PGM) or P6 (colour PPM).
// PNM samples are scaled by 1/maxval; colour is reduced to luminance.
AnyGrid load_grid(const std::filesystem::path& path);

// GRD1 u8 grids read as scalar map nonzero to 1.0; f32 grids read as binary
// are thresholded at 0.5.
ScalarGrid load_scalar(const std::filesystem::path& path);
BinaryGrid load_binary(const std::filesystem::path& path);

// Count of values outside [0,1]; the loaders never clamp.
std::size_t count_out_of_unit_range(const ScalarGrid& g);

}  // namespace morseuq
