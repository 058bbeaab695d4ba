#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vdlab/torus_grid.hpp"

namespace vdlab {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double_strict(const std::string& text);

/// Writes `content` to `path` through a temporary file and a rename.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

/// Several node fields over one grid, stored as CSV with columns
/// (i0[,i1], x0[,x1], <name>...) in lexicographic index order.
class FieldTable {
 public:
  explicit FieldTable(const TorusGrid& grid) : grid_(grid) {}

  const TorusGrid& grid() const noexcept { return grid_; }
  void set(const std::string& name, const std::vector<double>& values);
  bool has(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
  std::vector<std::string> names() const;
  /// Drops every column whose name starts with `prefix`.
  void erase_prefix(const std::string& prefix);

  std::string to_csv() const;
  void write(const std::string& path) const;
  static FieldTable parse(const std::string& csv);
  static FieldTable read(const std::string& path);

 private:
  TorusGrid grid_;
  std::vector<std::pair<std::string, std::vector<double>>> columns_;
};

}  // namespace vdlab
