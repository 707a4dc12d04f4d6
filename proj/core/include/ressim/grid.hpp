#pragma once

// Depth-averaged reservoir discretization: a structured rectangular grid with
// an active-cell mask, output regions, and well indicator supports.
//
// Cell ids are row-major from the lower-left corner of the domain:
//   cell_id = j * nx + i,  i in [0, nx) along x,  j in [0, ny) along y.
// They are stable and referenced by every CSV that carries per-cell data.
// Internally fields are stored per *active* cell; `active_index()` and
// `cell_id_of()` convert between the two numberings.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ressim {

/// One value per active cell.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(std::size_t n, double value = 0.0) : values_(n, value) {}
  explicit ScalarField(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  bool operator==(const ScalarField&) const = default;

 private:
  std::vector<double> values_;
};

/// Face directions of the 5-point stencil.
enum class Face : int { west = 0, east = 1, south = 2, north = 3 };

class DomainGrid {
 public:
  static constexpr int kNoNeighbor = -1;

  /// Builds a grid of `nx` x `ny` cells over [0, lx] x [0, ly] km. `mask` is
  /// row-major (size nx*ny); true marks an active cell. Throws ressim::Error on
  /// "no active cells" or "disconnected domain" (edge connectivity).
  static DomainGrid build(double lx_km, double ly_km, int nx, int ny,
                          const std::vector<bool>& mask);

  /// Convenience: every cell active.
  static DomainGrid build_full(double lx_km, double ly_km, int nx, int ny);

  int nx() const noexcept { return nx_; }
  int ny() const noexcept { return ny_; }
  double lx() const noexcept { return lx_; }
  double ly() const noexcept { return ly_; }
  double dx() const noexcept { return dx_; }
  double dy() const noexcept { return dy_; }
  double cell_area() const noexcept { return dx_ * dy_; }
  /// Depth-averaged volume: active-cell count times cell area [km^2].
  double volume() const noexcept { return static_cast<double>(active_count()) * cell_area(); }

  std::size_t cell_count() const noexcept { return static_cast<std::size_t>(nx_) * ny_; }
  std::size_t active_count() const noexcept { return active_ids_.size(); }

  bool is_active(int cell_id) const;
  std::optional<std::size_t> active_index(int cell_id) const;
  int cell_id_of(std::size_t active) const { return active_ids_.at(active); }

  /// Center of a cell in km.
  std::array<double, 2> center(int cell_id) const;
  /// Id of the cell containing (x, y) km, or nullopt outside the grid.
  std::optional<int> cell_at(double x_km, double y_km) const;

  /// Active-index neighbor across `face`, or kNoNeighbor on the mask boundary.
  int neighbor(std::size_t active, Face face) const {
    return neighbors_[active][static_cast<int>(face)];
  }

  ScalarField make_field(double value = 0.0) const { return ScalarField(active_count(), value); }

 private:
  int nx_ = 0, ny_ = 0;
  double lx_ = 0, ly_ = 0, dx_ = 0, dy_ = 0;
  std::vector<int> active_ids_;
  std::vector<int> index_of_;  // cell id -> active index or -1
  std::vector<std::array<int, 4>> neighbors_;
};

enum class RegionKind { pressure_output, sr_output };

std::string to_string(RegionKind kind);

struct Region {
  std::vector<int> cell_ids;       // sorted, unique
  std::vector<std::size_t> cells;  // active indices, same order as cell_ids
  double volume = 0.0;             // |cells| * cell_area [km^2]
  RegionKind kind = RegionKind::pressure_output;

  bool contains(std::size_t active) const;
};

/// Output regions. Regions of either kind must be pairwise disjoint.
class RegionSet {
 public:
  /// Adds a region; throws AssumptionError "regions must be disjoint (A4)" on
  /// overlap and ressim::Error on an empty set or an inactive cell.
  const Region& define_region(const DomainGrid& grid, std::vector<int> cell_ids, RegionKind kind);

  const std::vector<Region>& pressure() const noexcept { return pressure_; }
  const std::vector<Region>& sr() const noexcept { return sr_; }
  std::size_t m_u() const noexcept { return pressure_.size(); }
  std::size_t m_r() const noexcept { return sr_.size(); }
  std::size_t m() const noexcept { return m_u() + m_r(); }

  /// Pressure regions first, then SR regions (the stacking order of sigma).
  std::vector<const Region*> ordered() const;

 private:
  std::vector<Region> pressure_;
  std::vector<Region> sr_;
};

/// B_i: 1/V_i* on the support, 0 elsewhere. Throws on an empty support or an
/// inactive cell.
ScalarField make_well_indicator(const DomainGrid& grid, std::span<const int> support_cell_ids);

struct Well {
  std::vector<int> cell_ids;
  std::vector<std::size_t> cells;
  double support_volume = 0.0;  // V_i*
  /// Value of B_i on each support cell (1 / V_i*).
  double indicator_value() const { return 1.0 / support_volume; }
};

class WellSet {
 public:
  const Well& add(const DomainGrid& grid, std::vector<int> support_cell_ids);

  std::size_t size() const noexcept { return wells_.size(); }
  const Well& operator[](std::size_t i) const { return wells_[i]; }
  const std::vector<Well>& wells() const noexcept { return wells_; }

  ScalarField indicator(const DomainGrid& grid, std::size_t i) const;
  double min_support_volume() const;

 private:
  std::vector<Well> wells_;
};

/// True iff every support cell of `well` lies in `region`.
bool well_inside(const Well& well, const Region& region);

struct AssumptionReport {
  bool pass = true;
  std::vector<std::string> failures;
};

/// Disjoint regions, m = m_u + m_R <= n, at least one well support per region,
/// and disjoint supports for wells sitting in distinct regions.
AssumptionReport check_assumption_a4(const RegionSet& regions, const WellSet& wells);

}  // namespace ressim
