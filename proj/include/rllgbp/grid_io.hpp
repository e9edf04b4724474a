#pragma once

#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rllgbp/constraint.hpp"

namespace rllgbp {

/// Text form of a grid: rows of '0'/'1' characters. 3-D arrays list their
/// layers separated by one blank line; in multi-array streams, 2-D arrays
/// are separated by blank lines and 3-D arrays by a line containing "==".
inline std::string format_grid(const BinaryArray& x) {
  std::string out;
  const int d = x.dims();
  const int q = d == 3 ? x.shape[0] : 1;
  const int m = d == 3 ? x.shape[1] : x.shape[0];
  const int n = d == 1 ? 1 : x.shape[static_cast<size_t>(d - 1)];
  size_t idx = 0;
  for (int layer = 0; layer < q; ++layer) {
    if (layer) out += '\n';
    const int rows = d == 1 ? 1 : m;
    const int cols = d == 1 ? x.shape[0] : n;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) out += x.cells[idx++] ? '1' : '0';
      out += '\n';
    }
  }
  return out;
}

inline std::vector<BinaryArray> parse_grids(std::istream& in, int dims) {
  if (dims < 1 || dims > 3) throw std::invalid_argument("grids must be 1-D, 2-D or 3-D");
  std::vector<BinaryArray> arrays;
  std::vector<std::vector<std::string>> layers(1);
  std::string line;

  auto flush_array = [&]() {
    // drop trailing empty layer blocks
    while (!layers.empty() && layers.back().empty()) layers.pop_back();
    if (layers.empty()) {
      layers.assign(1, {});
      return;
    }
    const int q = static_cast<int>(layers.size());
    const int m = static_cast<int>(layers[0].size());
    const int n = static_cast<int>(layers[0][0].size());
    if (dims < 3 && q != 1) throw std::invalid_argument("2-D input has more than one layer");
    if (dims == 1 && m != 1) throw std::invalid_argument("1-D input has more than one row");
    std::vector<int> shape;
    if (dims == 3) shape = {q, m, n};
    if (dims == 2) shape = {m, n};
    if (dims == 1) shape = {n};
    BinaryArray x(shape);
    size_t idx = 0;
    for (const auto& layer : layers) {
      if (static_cast<int>(layer.size()) != m) throw std::invalid_argument("ragged layer heights");
      for (const std::string& row : layer) {
        if (static_cast<int>(row.size()) != n) throw std::invalid_argument("ragged row widths");
        for (char ch : row) {
          if (ch != '0' && ch != '1') throw std::invalid_argument("grid characters must be 0 or 1");
          x.cells[idx++] = ch == '1';
        }
      }
    }
    arrays.push_back(std::move(x));
    layers.assign(1, {});
  };

  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    if (line == "==") {
      flush_array();
    } else if (line.empty()) {
      if (dims == 3) {
        if (!layers.back().empty()) layers.emplace_back();
      } else {
        flush_array();
      }
    } else {
      layers.back().push_back(line);
    }
  }
  flush_array();
  return arrays;
}

inline std::vector<BinaryArray> parse_grids(const std::string& text, int dims) {
  std::istringstream ss(text);
  return parse_grids(ss, dims);
}

}  // namespace rllgbp
