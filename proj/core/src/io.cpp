#include "vdlab/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vdlab/error.hpp"

namespace vdlab {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Row order: lexicographic in (i0, i1), i.e. i0 outermost.
std::vector<std::size_t> lexicographic_order(const TorusGrid& g) {
  std::vector<std::size_t> order;
  order.reserve(g.size());
  if (g.dim() == 1) {
    for (int i = 0; i < g.nodes_per_axis(); ++i) order.push_back(static_cast<std::size_t>(i));
  } else {
    for (int i0 = 0; i0 < g.nodes_per_axis(); ++i0)
      for (int i1 = 0; i1 < g.nodes_per_axis(); ++i1) order.push_back(g.flat_index({i0, i1}));
  }
  return order;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw Error("failed to format number");
  return std::string(buf, ptr);
}

double parse_double_strict(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) throw DomainError("not a number: '" + text + "'");
  return v;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + tmp);
    os << content;
    if (!os) throw Error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_json(const std::string& path, const nlohmann::json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const std::string& path) { return nlohmann::json::parse(read_file(path)); }

void FieldTable::set(const std::string& name, const std::vector<double>& values) {
  if (values.size() != grid_.size()) throw DomainError("column '" + name + "' has wrong length");
  for (auto& [n, v] : columns_) {
    if (n == name) {
      v = values;
      return;
    }
  }
  columns_.emplace_back(name, values);
}

bool FieldTable::has(const std::string& name) const {
  for (const auto& c : columns_)
    if (c.first == name) return true;
  return false;
}

std::vector<double> FieldTable::column(const std::string& name) const {
  for (const auto& c : columns_)
    if (c.first == name) return c.second;
  throw Error("field column not found: " + name);
}

std::vector<std::string> FieldTable::names() const {
  std::vector<std::string> out;
  for (const auto& c : columns_) out.push_back(c.first);
  return out;
}

void FieldTable::erase_prefix(const std::string& prefix) {
  std::erase_if(columns_, [&](const auto& c) { return c.first.starts_with(prefix); });
}

std::string FieldTable::to_csv() const {
  std::string out;
  const int n = grid_.dim();
  for (int k = 0; k < n; ++k) out += (k ? ",i" : "i") + std::to_string(k);
  for (int k = 0; k < n; ++k) out += ",x" + std::to_string(k);
  for (const auto& c : columns_) out += "," + c.first;
  out += "\n";
  for (std::size_t node : lexicographic_order(grid_)) {
    const MultiIndex idx = grid_.multi_index(node);
    const Vec x = grid_.coords(node);
    for (int k = 0; k < n; ++k) out += (k ? "," : "") + std::to_string(idx[k]);
    for (int k = 0; k < n; ++k) out += "," + format_double(x[k]);
    for (const auto& c : columns_) out += "," + format_double(c.second[node]);
    out += "\n";
  }
  return out;
}

void FieldTable::write(const std::string& path) const { write_file_atomic(path, to_csv()); }

FieldTable FieldTable::parse(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  if (!std::getline(is, line)) throw Error("empty field CSV");
  const auto header = split_csv_line(line);
  const int dim = header.size() >= 2 && header[1] == "i1" ? 2 : 1;
  const std::size_t first_value = static_cast<std::size_t>(2 * dim);
  if (header.size() < first_value || header[0] != "i0" || header[dim] != "x0")
    throw Error("field CSV header must start with index and coordinate columns");

  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line))
    if (!line.empty()) rows.push_back(split_csv_line(line));
  const std::size_t count = rows.size();
  int per_axis = static_cast<int>(count);
  if (dim == 2) per_axis = static_cast<int>(std::lround(std::sqrt(static_cast<double>(count))));
  TorusGrid grid(dim, per_axis);
  if (grid.size() != count) throw Error("field CSV row count does not match a square grid");

  FieldTable table(grid);
  std::vector<std::vector<double>> data(header.size() - first_value, std::vector<double>(count));
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw Error("field CSV row has wrong column count");
    MultiIndex idx{};
    for (int k = 0; k < dim; ++k) idx[k] = std::stoi(row[k]);
    const std::size_t node = grid.flat_index(idx);
    for (std::size_t c = first_value; c < row.size(); ++c)
      data[c - first_value][node] = parse_double_strict(row[c]);
  }
  for (std::size_t c = first_value; c < header.size(); ++c)
    table.set(header[c], data[c - first_value]);
  return table;
}

FieldTable FieldTable::read(const std::string& path) { return parse(read_file(path)); }

}  // namespace vdlab
