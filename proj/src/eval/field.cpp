#include "gcf/eval/field.hpp"

#include <algorithm>
#include <cmath>

#include "gcf/errors.hpp"
#include "gcf/numerics/kernels.hpp"

namespace gcf::eval {

namespace {

void check_inputs(const std::vector<double>& values, const std::vector<data::Point>& anchors, const GridSpec& grid,
                  double sigma) {
  if (values.size() != anchors.size()) throw ShapeError("one anchor per value is required");
  if (!(sigma > 0)) throw ContractError("kernel bandwidth must be positive");
  if (!(grid.cell > 0)) throw ContractError("grid cell size must be positive");
}

std::optional<double> cell_value(const std::vector<double>& values, const std::vector<data::Point>& anchors,
                                 double cx, double cy, double sigma) {
  const double support = 9.0 * sigma * sigma;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  bool any = false;
  double num = 0.0, den = 0.0;
  for (std::size_t s = 0; s < anchors.size(); ++s) {
    const double dx = cx - anchors[s].x, dy = cy - anchors[s].y;
    const double d2 = dx * dx + dy * dy;
    any = any || d2 <= support;
    const double w = std::exp(-d2 * inv);
    num += values[s] * w;
    den += w;
  }
  if (!any || den == 0.0) return std::nullopt;
  return num / den;
}

}  // namespace

GridSpec grid_around(const std::vector<data::Point>& anchors, double cell, double margin) {
  if (anchors.empty()) throw ContractError("grid needs at least one anchor");
  if (!(cell > 0) || margin < 0) throw ContractError("grid cell must be positive and margin non-negative");
  double xmin = anchors[0].x, xmax = xmin, ymin = anchors[0].y, ymax = ymin;
  for (const auto& a : anchors) {
    xmin = std::min(xmin, a.x);
    xmax = std::max(xmax, a.x);
    ymin = std::min(ymin, a.y);
    ymax = std::max(ymax, a.y);
  }
  GridSpec g;
  g.cell = cell;
  g.x0 = std::floor((xmin - margin) / cell) * cell;
  g.y0 = std::floor((ymin - margin) / cell) * cell;
  g.nx = static_cast<std::size_t>(std::ceil((xmax + margin - g.x0) / cell));
  g.ny = static_cast<std::size_t>(std::ceil((ymax + margin - g.y0) / cell));
  g.nx = std::max<std::size_t>(g.nx, 1);
  g.ny = std::max<std::size_t>(g.ny, 1);
  return g;
}

ErrorField spatial_error_field(const std::vector<double>& values, const std::vector<data::Point>& anchors,
                               const GridSpec& grid, double sigma) {
  check_inputs(values, anchors, grid, sigma);
  ErrorField f{grid, sigma, std::vector<std::optional<double>>(grid.nx * grid.ny)};
  const auto nx = static_cast<std::ptrdiff_t>(grid.nx);
#pragma omp parallel for schedule(static) if (num::kernels::threads() > 1)
  for (std::ptrdiff_t ix = 0; ix < nx; ++ix) {
    const auto x = static_cast<std::size_t>(ix);
    for (std::size_t iy = 0; iy < grid.ny; ++iy)
      f.values[x * grid.ny + iy] = cell_value(values, anchors, grid.center_x(x), grid.center_y(iy), sigma);
  }
  return f;
}

ErrorField spatial_error_field_serial(const std::vector<double>& values, const std::vector<data::Point>& anchors,
                                      const GridSpec& grid, double sigma) {
  check_inputs(values, anchors, grid, sigma);
  ErrorField f{grid, sigma, std::vector<std::optional<double>>(grid.nx * grid.ny)};
  for (std::size_t ix = 0; ix < grid.nx; ++ix)
    for (std::size_t iy = 0; iy < grid.ny; ++iy)
      f.values[ix * grid.ny + iy] = cell_value(values, anchors, grid.center_x(ix), grid.center_y(iy), sigma);
  return f;
}

nlohmann::json field_to_json(const ErrorField& f) {
  nlohmann::json values = nlohmann::json::array();
  for (const auto& v : f.values) values.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
  const auto& g = f.grid;
  const double xmax = g.x0 + g.cell * static_cast<double>(g.nx);
  const double ymax = g.y0 + g.cell * static_cast<double>(g.ny);
  return {{"extent", {g.x0, xmax, g.y0, ymax}}, {"shape", {g.nx, g.ny}}, {"sigma", f.sigma}, {"values", values}};
}

ErrorField field_from_json(const nlohmann::json& j) {
  try {
    ErrorField f;
    const auto& e = j.at("extent");
    f.grid.nx = j.at("shape").at(0).get<std::size_t>();
    f.grid.ny = j.at("shape").at(1).get<std::size_t>();
    if (f.grid.nx == 0 || f.grid.ny == 0) throw FormatError("empty field grid");
    f.grid.x0 = e.at(0).get<double>();
    f.grid.y0 = e.at(2).get<double>();
    f.grid.cell = (e.at(1).get<double>() - f.grid.x0) / static_cast<double>(f.grid.nx);
    f.sigma = j.at("sigma").get<double>();
    const auto& v = j.at("values");
    if (v.size() != f.grid.nx * f.grid.ny) throw FormatError("field value count does not match its shape");
    for (const auto& x : v) f.values.push_back(x.is_null() ? std::nullopt : std::optional<double>(x.get<double>()));
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed error field: ") + e.what());
  }
}

}  // namespace gcf::eval
