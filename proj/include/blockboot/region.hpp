#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "blockboot/types.hpp"

namespace blockboot {

enum class Prototype { unit_cube, unit_disk };

Prototype parse_prototype(std::string_view name);
std::string_view to_string(Prototype prototype);

/// The sampling region lambda * R0.
///
/// Coordinates are anchored at the origin corner: the cube prototype occupies
/// [0, lambda]^d and the disk prototype is the ball of radius lambda / 2
/// centered at (lambda / 2, ..., lambda / 2).
class Region {
 public:
  Region(Prototype prototype, int dim, double lambda);

  Prototype prototype() const { return prototype_; }
  int dim() const { return dim_; }
  double lambda() const { return lambda_; }
  double volume() const;

  /// Closed-set membership.
  bool contains(std::span<const double> x) const;
  /// True when the closed cube lo + [0, side]^d lies inside the closed region.
  bool contains_cube(std::span<const double> lo, double side) const;
  /// True when lo + [0, side)^d meets the region in a set of positive volume.
  bool meets_cube(std::span<const double> lo, double side) const;
  /// Containment slack applied to boundary comparisons (relative to lambda).
  double tolerance() const { return 1e-12 * lambda_; }

 private:
  Prototype prototype_;
  int dim_;
  double lambda_;
};

Region scale_region(Prototype prototype, int dim, double lambda);

/// Volume of the unit-diameter ball in d dimensions.
double unit_disk_volume(int dim);

struct CellShape {
  LatticePoint key;
  bool complete = false;
};

/// Disjoint cover of the region by R_n(k) = region ∩ (k b + [0, b)^d).
class BlockPartition {
 public:
  BlockPartition(Region region, double b, std::vector<CellShape> cells);

  const Region& region() const { return region_; }
  double block_side() const { return b_; }
  const std::vector<CellShape>& cells() const { return cells_; }
  std::size_t size() const { return cells_.size(); }
  std::size_t complete_count() const;
  std::optional<std::size_t> find(const LatticePoint& key) const;
  /// Index of the cell holding a region point. Points on the region's upper
  /// faces are clamped into the last cell along that axis.
  std::size_t cell_of(std::span<const double> x) const;

 private:
  Region region_;
  double b_;
  std::vector<CellShape> cells_;  // lexicographic by key
  std::vector<long> key_max_;
};

BlockPartition partition(const Region& region, double b);

/// Unit-lattice anchors i with i + [0, b]^d inside the closed region.
struct TemplateIndexSet {
  std::vector<LatticePoint> positions;
  std::size_t size() const { return positions.size(); }
};

TemplateIndexSet template_positions(const Region& region, double b);

/// Uniform bin grid over the sites for box queries.
class SiteIndex {
 public:
  SiteIndex(int dim, double cell_size, std::vector<long> extent, std::vector<std::vector<std::size_t>> bins);

  double cell_size() const { return cell_size_; }
  int dim() const { return dim_; }
  LatticePoint bin_of(std::span<const double> x) const;
  /// Ids stored in a bin, empty for bins outside the grid.
  std::span<const std::size_t> bin(const LatticePoint& coords) const;
  std::size_t bin_count() const { return bins_.size(); }
  std::size_t site_count() const;

  /// Visits every id whose bin intersects the box [lo, hi].
  template <typename Visitor>
  void for_each_in_box(std::span<const double> lo, std::span<const double> hi, Visitor&& visit) const;

 private:
  std::size_t flat(const LatticePoint& coords) const;

  int dim_;
  double cell_size_;
  std::vector<long> extent_;
  std::vector<std::vector<std::size_t>> bins_;
};

SiteIndex build_site_index(const Region& region, const SiteMatrix& sites, double cell_size);

enum class BlockShape {
  cell,  // the translated copy of R_n(k)
  cube,  // the full cube, ignoring the cell's own shape
};

/// Ids j (ascending) with s_j + k b - offset in R_n(k), i.e. the sites of the
/// copy of cell k translated so that its lattice cube starts at `offset`.
std::vector<std::size_t> sites_in_translate(const BlockPartition& partition, const SiteIndex& index,
                                            const SiteMatrix& sites, const CellShape& cell,
                                            std::span<const double> offset,
                                            BlockShape shape = BlockShape::cell);

// ---------------------------------------------------------------------------

template <typename Visitor>
void SiteIndex::for_each_in_box(std::span<const double> lo, std::span<const double> hi, Visitor&& visit) const {
  if (bins_.empty()) return;
  LatticePoint first(dim_), last(dim_);
  for (int c = 0; c < dim_; ++c) {
    first[c] = std::max<long>(0, static_cast<long>(std::floor(lo[c] / cell_size_)));
    last[c] = std::min<long>(extent_[c] - 1, static_cast<long>(std::floor(hi[c] / cell_size_)));
    if (first[c] > last[c]) return;
  }
  LatticePoint cursor = first;
  while (true) {
    for (std::size_t id : bins_[flat(cursor)]) visit(id);
    int axis = 0;
    while (axis < dim_) {
      if (++cursor[axis] <= last[axis]) break;
      cursor[axis] = first[axis];
      ++axis;
    }
    if (axis == dim_) return;
  }
}

}  // namespace blockboot
