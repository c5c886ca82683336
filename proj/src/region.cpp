#include "blockboot/region.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace blockboot {

Prototype parse_prototype(std::string_view name) {
  if (name == "unit-cube" || name == "cube" || name == "square") return Prototype::unit_cube;
  if (name == "unit-disk" || name == "disk") return Prototype::unit_disk;
  throw ConfigError("unknown region prototype '" + std::string(name) + "' (expected unit-cube or unit-disk)");
}

std::string_view to_string(Prototype prototype) {
  return prototype == Prototype::unit_cube ? "unit-cube" : "unit-disk";
}

double unit_disk_volume(int dim) {
  // Ball of radius 1/2: pi^(d/2) / Gamma(d/2 + 1) * (1/2)^d.
  return std::pow(std::numbers::pi, dim / 2.0) / std::tgamma(dim / 2.0 + 1.0) * std::pow(0.5, dim);
}

Region::Region(Prototype prototype, int dim, double lambda) : prototype_(prototype), dim_(dim), lambda_(lambda) {
  if (dim < 1) throw std::invalid_argument("region dimension must be positive");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("region scale lambda must be positive");
}

double Region::volume() const {
  const double cube = std::pow(lambda_, dim_);
  return prototype_ == Prototype::unit_cube ? cube : cube * unit_disk_volume(dim_);
}

bool Region::contains(std::span<const double> x) const {
  const double tol = tolerance();
  if (prototype_ == Prototype::unit_cube) {
    return std::all_of(x.begin(), x.end(), [&](double v) { return v >= -tol && v <= lambda_ + tol; });
  }
  const double half = 0.5 * lambda_;
  double r2 = 0.0;
  for (double v : x) r2 += (v - half) * (v - half);
  return std::sqrt(r2) <= half + tol;
}

bool Region::contains_cube(std::span<const double> lo, double side) const {
  const double tol = tolerance();
  if (prototype_ == Prototype::unit_cube) {
    return std::all_of(lo.begin(), lo.end(),
                       [&](double v) { return v >= -tol && v + side <= lambda_ + tol; });
  }
  // The ball is convex, so the farthest corner decides.
  const double half = 0.5 * lambda_;
  double r2 = 0.0;
  for (double v : lo) {
    const double far = std::max(std::abs(v - half), std::abs(v + side - half));
    r2 += far * far;
  }
  return std::sqrt(r2) <= half + tol;
}

bool Region::meets_cube(std::span<const double> lo, double side) const {
  if (prototype_ == Prototype::unit_cube) {
    return std::all_of(lo.begin(), lo.end(), [&](double v) { return v < lambda_ && v + side > 0.0; });
  }
  const double half = 0.5 * lambda_;
  double r2 = 0.0;
  for (double v : lo) {
    const double nearest = std::clamp(half, v, v + side);
    r2 += (nearest - half) * (nearest - half);
  }
  return std::sqrt(r2) < half;
}

Region scale_region(Prototype prototype, int dim, double lambda) {
  if (dim < 1) throw std::invalid_argument("scale_region: dimension must be >= 1");
  if (!(lambda > 0.0)) throw std::invalid_argument("scale_region: lambda must be > 0");
  return Region(prototype, dim, lambda);
}

namespace {

// Calls fn(point) for every lattice point in the box [first, last] (inclusive).
template <typename Fn>
void for_each_lattice(const LatticePoint& first, const LatticePoint& last, Fn&& fn) {
  const std::size_t dim = first.size();
  for (std::size_t c = 0; c < dim; ++c) {
    if (first[c] > last[c]) return;
  }
  LatticePoint cursor = first;
  while (true) {
    fn(cursor);
    std::size_t axis = dim;
    for (std::size_t c = dim; c-- > 0;) {  // last axis fastest: lexicographic order
      if (++cursor[c] <= last[c]) {
        axis = c;
        break;
      }
      cursor[c] = first[c];
    }
    if (axis == dim) return;
  }
}

std::vector<double> scaled(const LatticePoint& key, double b) {
  std::vector<double> out(key.size());
  for (std::size_t c = 0; c < key.size(); ++c) out[c] = static_cast<double>(key[c]) * b;
  return out;
}

}  // namespace

BlockPartition::BlockPartition(Region region, double b, std::vector<CellShape> cells)
    : region_(region), b_(b), cells_(std::move(cells)), key_max_(static_cast<std::size_t>(region.dim()), 0) {
  for (const auto& cell : cells_) {
    for (std::size_t c = 0; c < key_max_.size(); ++c) key_max_[c] = std::max(key_max_[c], cell.key[c]);
  }
}

std::size_t BlockPartition::complete_count() const {
  return static_cast<std::size_t>(std::count_if(cells_.begin(), cells_.end(), [](const CellShape& c) { return c.complete; }));
}

std::optional<std::size_t> BlockPartition::find(const LatticePoint& key) const {
  auto it = std::lower_bound(cells_.begin(), cells_.end(), key,
                             [](const CellShape& cell, const LatticePoint& k) { return cell.key < k; });
  if (it == cells_.end() || it->key != key) return std::nullopt;
  return static_cast<std::size_t>(it - cells_.begin());
}

std::size_t BlockPartition::cell_of(std::span<const double> x) const {
  LatticePoint key(x.size());
  for (std::size_t c = 0; c < x.size(); ++c) {
    key[c] = std::clamp(static_cast<long>(std::floor(x[c] / b_)), 0L, key_max_[c]);
  }
  if (auto found = find(key)) return *found;
  // Tangency points of a curved boundary: fall back to the neighbouring cell
  // whose closed cube holds the point.
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    bool inside = true;
    for (std::size_t c = 0; c < x.size() && inside; ++c) {
      const double lo = static_cast<double>(cells_[i].key[c]) * b_;
      inside = x[c] >= lo - region_.tolerance() && x[c] <= lo + b_ + region_.tolerance();
    }
    if (inside) return i;
  }
  throw std::invalid_argument("cell_of: point is outside the partitioned region");
}

BlockPartition partition(const Region& region, double b) {
  if (!(b > 0.0)) throw std::invalid_argument("partition: block side must be positive");
  if (b > region.lambda() * (1.0 + 1e-12)) {
    throw std::invalid_argument("partition: block side " + std::to_string(b) + " exceeds lambda " +
                                std::to_string(region.lambda()));
  }
  const auto dim = static_cast<std::size_t>(region.dim());
  const long top = static_cast<long>(std::ceil(region.lambda() / b - 1e-12)) - 1;
  std::vector<CellShape> cells;
  for_each_lattice(LatticePoint(dim, 0), LatticePoint(dim, top), [&](const LatticePoint& key) {
    const auto lo = scaled(key, b);
    if (!region.meets_cube(lo, b)) return;
    cells.push_back(CellShape{key, region.contains_cube(lo, b)});
  });
  return BlockPartition(region, b, std::move(cells));
}

TemplateIndexSet template_positions(const Region& region, double b) {
  if (!(b > 0.0)) throw std::invalid_argument("template_positions: block side must be positive");
  const auto dim = static_cast<std::size_t>(region.dim());
  const long top = static_cast<long>(std::floor(region.lambda() - b + region.tolerance()));
  TemplateIndexSet out;
  for_each_lattice(LatticePoint(dim, 0), LatticePoint(dim, top), [&](const LatticePoint& i) {
    if (region.contains_cube(scaled(i, 1.0), b)) out.positions.push_back(i);
  });
  if (out.positions.empty()) {
    throw std::invalid_argument("no admissible blocks: no lattice cube of side " + std::to_string(b) +
                                " fits in the region");
  }
  return out;
}

SiteIndex::SiteIndex(int dim, double cell_size, std::vector<long> extent, std::vector<std::vector<std::size_t>> bins)
    : dim_(dim), cell_size_(cell_size), extent_(std::move(extent)), bins_(std::move(bins)) {}

LatticePoint SiteIndex::bin_of(std::span<const double> x) const {
  LatticePoint out(static_cast<std::size_t>(dim_));
  for (int c = 0; c < dim_; ++c) out[c] = static_cast<long>(std::floor(x[c] / cell_size_));
  return out;
}

std::size_t SiteIndex::flat(const LatticePoint& coords) const {
  std::size_t index = 0;
  for (int c = dim_ - 1; c >= 0; --c) index = index * static_cast<std::size_t>(extent_[c]) + coords[c];
  return index;
}

std::span<const std::size_t> SiteIndex::bin(const LatticePoint& coords) const {
  for (int c = 0; c < dim_; ++c) {
    if (coords[c] < 0 || coords[c] >= extent_[c]) return {};
  }
  return bins_[flat(coords)];
}

std::size_t SiteIndex::site_count() const {
  std::size_t total = 0;
  for (const auto& b : bins_) total += b.size();
  return total;
}

SiteIndex build_site_index(const Region& region, const SiteMatrix& sites, double cell_size) {
  if (!(cell_size > 0.0)) throw std::invalid_argument("build_site_index: cell size must be positive");
  if (sites.rows() > 0 && sites.cols() != region.dim()) {
    throw std::invalid_argument("build_site_index: site dimension does not match region");
  }
  const int dim = region.dim();
  std::vector<long> extent(static_cast<std::size_t>(dim), 1);
  for (Eigen::Index i = 0; i < sites.rows(); ++i) {
    const auto x = site_at(sites, i);
    if (!region.contains(x)) throw DataError("site " + std::to_string(i) + " lies outside the sampling region");
    for (int c = 0; c < dim; ++c) {
      extent[c] = std::max(extent[c], static_cast<long>(std::floor(std::max(0.0, x[c]) / cell_size)) + 1);
    }
  }
  std::size_t total = 1;
  for (long e : extent) total *= static_cast<std::size_t>(e);
  if (sites.rows() == 0) total = 0;
  std::vector<std::vector<std::size_t>> bins(total);
  for (Eigen::Index i = 0; i < sites.rows(); ++i) {
    const auto x = site_at(sites, i);
    std::size_t flat = 0;
    for (int c = dim - 1; c >= 0; --c) {
      const long coord = std::max(0L, static_cast<long>(std::floor(x[c] / cell_size)));
      flat = flat * static_cast<std::size_t>(extent[c]) + static_cast<std::size_t>(coord);
    }
    bins[flat].push_back(static_cast<std::size_t>(i));
  }
  return SiteIndex(dim, cell_size, std::move(extent), std::move(bins));
}

std::vector<std::size_t> sites_in_translate(const BlockPartition& partition, const SiteIndex& index,
                                            const SiteMatrix& sites, const CellShape& cell,
                                            std::span<const double> offset, BlockShape shape) {
  const double b = partition.block_side();
  const Region& region = partition.region();
  const auto dim = static_cast<std::size_t>(region.dim());
  std::vector<double> hi(dim), moved(dim);
  for (std::size_t c = 0; c < dim; ++c) hi[c] = offset[c] + b;
  const bool check_shape = shape == BlockShape::cell && !cell.complete;

  std::vector<std::size_t> out;
  index.for_each_in_box(offset, hi, [&](std::size_t id) {
    const double* s = sites.row(static_cast<Eigen::Index>(id)).data();
    for (std::size_t c = 0; c < dim; ++c) {
      if (s[c] < offset[c] || s[c] >= hi[c]) return;
    }
    if (check_shape) {
      for (std::size_t c = 0; c < dim; ++c) moved[c] = s[c] - offset[c] + static_cast<double>(cell.key[c]) * b;
      if (!region.contains(moved)) return;
    }
    out.push_back(id);
  });
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace blockboot
