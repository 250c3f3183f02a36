#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sgc {

// Column vector of runtime size. Scalar is float for training/serving and
// double for gradient-check mode.
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Row-major table: one embedding per row, rows are contiguous for IO.
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Column stack (d x n): one neighbor embedding per column.
template <class S>
using Cols = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

enum class Side : std::uint8_t { Query = 0, Item = 1 };

inline Side other_side(Side s) { return s == Side::Query ? Side::Item : Side::Query; }

// A node in the bipartite graph: partition plus index within that partition.
struct NodeRef {
  Side side = Side::Query;
  std::uint32_t index = 0;

  friend bool operator==(const NodeRef&, const NodeRef&) = default;
};

inline NodeRef query_node(std::uint32_t i) { return {Side::Query, i}; }
inline NodeRef item_node(std::uint32_t i) { return {Side::Item, i}; }

enum class Variant : std::uint8_t { Mean = 0, Attention = 1, Mask = 2 };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::Mean: return "mean";
    case Variant::Attention: return "attention";
    case Variant::Mask: return "mask";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "mean") return Variant::Mean;
  if (s == "attention") return Variant::Attention;
  if (s == "mask") return Variant::Mask;
  throw std::invalid_argument("unknown variant '" + s + "' (expected mean|attention|mask)");
}

}  // namespace sgc
