#pragma once

// Tab-separated text files: `#` header lines naming the columns, then one
// row per record with every number written to 17 significant digits.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qoct/config.hpp"
#include "qoct/control.hpp"
#include "qoct/grid.hpp"

namespace qoct {

class TsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Table = std::vector<std::vector<double>>;

inline void write_tsv(const std::filesystem::path& path, const std::vector<std::string>& header_lines,
                      const std::vector<std::string>& columns, const Table& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TsvError("cannot write " + path.string());
  for (const auto& h : header_lines) out << "# " << h << "\n";
  out << "#";
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "\t" : " ") << columns[c];
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != columns.size()) throw TsvError("row width differs from header in " + path.string());
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << '\t';
      out << format_double(row[c]);
    }
    out << '\n';
  }
  if (!out) throw TsvError("write failed for " + path.string());
}

/// Numeric rows of a TSV file; `#` lines are skipped.
inline Table read_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TsvError("cannot read " + path.string());
  Table rows;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<double> row;
    std::string cell;
    while (std::getline(ss, cell, '\t')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw TsvError(path.string() + ":" + std::to_string(n) + ": bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw TsvError(path.string() + ":" + std::to_string(n) + ": ragged row");
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<std::string> coordinate_columns(const Grid& g) {
  if (g.dim == 1) return {"x[a.u.]"};
  return {"x[a.u.]", "y[a.u.]"};
}

inline void write_field(const std::filesystem::path& path, const ControlField& f) {
  Table rows;
  for (int i = 0; i <= f.mesh.steps; ++i) rows.push_back({f.mesh.time(i), f.samples[static_cast<std::size_t>(i)]});
  write_tsv(path, {"control field, polarization (" + format_double(f.polarization.polarization[0]) + ", " +
                       format_double(f.polarization.polarization[1]) + ")"},
            {"t[a.u.]", "eps[a.u.]"}, rows);
}

inline ControlField read_field(const std::filesystem::path& path, const TimeMesh& mesh, const DipoleOperator& pol) {
  const Table rows = read_tsv(path);
  if (rows.size() != static_cast<std::size_t>(mesh.steps) + 1 || rows.front().size() != 2)
    throw TsvError(path.string() + ": expected " + std::to_string(mesh.steps + 1) + " rows of (t, eps)");
  ControlField f(mesh, pol);
  for (int i = 0; i <= mesh.steps; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    if (std::abs(r[0] - mesh.time(i)) > 1e-9 * std::max(1.0, mesh.horizon()))
      throw TsvError(path.string() + ": time column does not match the mesh at row " + std::to_string(i));
    f.samples[static_cast<std::size_t>(i)] = r[1];
  }
  return f;
}

namespace detail {
inline void append_point(std::vector<double>& row, const Grid& g, std::size_t i) {
  const auto p = g.point(i);
  row.push_back(p[0]);
  if (g.dim == 2) row.push_back(p[1]);
}

inline void check_points(const Table& rows, const Grid& g, const std::filesystem::path& path, std::size_t width) {
  if (rows.size() != g.size() || rows.front().size() != width)
    throw TsvError(path.string() + ": expected " + std::to_string(g.size()) + " rows of " + std::to_string(width) +
                   " columns");
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto p = g.point(i);
    if (std::abs(rows[i][0] - p[0]) > 1e-9 || (g.dim == 2 && std::abs(rows[i][1] - p[1]) > 1e-9))
      throw TsvError(path.string() + ": coordinates differ from the grid at row " + std::to_string(i));
  }
}
}  // namespace detail

inline void write_state(const std::filesystem::path& path, const ComplexField& psi) {
  auto cols = coordinate_columns(psi.grid);
  cols.push_back("re_psi");
  cols.push_back("im_psi");
  Table rows;
  rows.reserve(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i) {
    std::vector<double> r;
    detail::append_point(r, psi.grid, i);
    r.push_back(psi[i].real());
    r.push_back(psi[i].imag());
    rows.push_back(std::move(r));
  }
  write_tsv(path, {"wavefunction, " + std::to_string(psi.grid.dim) + "D grid, spacing " +
                       format_double(psi.grid.spacing)},
            cols, rows);
}

inline ComplexField read_state(const std::filesystem::path& path, const Grid& g) {
  const Table rows = read_tsv(path);
  const std::size_t d = static_cast<std::size_t>(g.dim);
  detail::check_points(rows, g, path, d + 2);
  ComplexField psi(g);
  for (std::size_t i = 0; i < g.size(); ++i) psi[i] = {rows[i][d], rows[i][d + 1]};
  return psi;
}

/// Reads the density column of a density file (coordinates, n[, ...]).
inline RealField read_density(const std::filesystem::path& path, const Grid& g) {
  const Table rows = read_tsv(path);
  const std::size_t d = static_cast<std::size_t>(g.dim);
  if (!rows.empty() && rows.front().size() < d + 1) throw TsvError(path.string() + ": missing density column");
  detail::check_points(rows, g, path, rows.empty() ? d + 1 : rows.front().size());
  RealField n(g);
  for (std::size_t i = 0; i < g.size(); ++i) n[i] = rows[i][d];
  return n;
}

inline void write_densities(const std::filesystem::path& path, const RealField& n, const RealField* n_tg) {
  auto cols = coordinate_columns(n.grid);
  cols.push_back("n[a.u.]");
  if (n_tg) cols.push_back("n_tg[a.u.]");
  Table rows;
  rows.reserve(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) {
    std::vector<double> r;
    detail::append_point(r, n.grid, i);
    r.push_back(n[i]);
    if (n_tg) r.push_back((*n_tg)[i]);
    rows.push_back(std::move(r));
  }
  write_tsv(path, {"density at final time"}, cols, rows);
}

}  // namespace qoct
