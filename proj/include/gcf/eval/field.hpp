#pragma once

#include <optional>
#include <vector>

#include "gcf/data/records.hpp"
#include "json.hpp"

namespace gcf::eval {

struct GridSpec {
  double x0 = 0.0;  // lower-left corner
  double y0 = 0.0;
  double cell = 1.0;
  std::size_t nx = 0;
  std::size_t ny = 0;

  double center_x(std::size_t ix) const { return x0 + (static_cast<double>(ix) + 0.5) * cell; }
  double center_y(std::size_t iy) const { return y0 + (static_cast<double>(iy) + 0.5) * cell; }
};

// Smallest cell-aligned grid covering every anchor with `margin` to spare.
GridSpec grid_around(const std::vector<data::Point>& anchors, double cell, double margin);

struct ErrorField {
  GridSpec grid;
  double sigma = 1.0;
  // Index ix * ny + iy; empty where no anchor lies within 3 sigma.
  std::vector<std::optional<double>> values;
};

// Gaussian-weighted mean of `values` at each cell center (Nadaraya-Watson).
ErrorField spatial_error_field(const std::vector<double>& values, const std::vector<data::Point>& anchors,
                               const GridSpec& grid, double sigma);
ErrorField spatial_error_field_serial(const std::vector<double>& values, const std::vector<data::Point>& anchors,
                                      const GridSpec& grid, double sigma);

// {"extent": [xmin, xmax, ymin, ymax], "shape": [nx, ny], "sigma": s, "values": [...]}
nlohmann::json field_to_json(const ErrorField& f);
ErrorField field_from_json(const nlohmann::json& j);

}  // namespace gcf::eval
