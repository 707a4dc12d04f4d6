#include "ressim/grid.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "ressim/error.hpp"

namespace ressim {

DomainGrid DomainGrid::build(double lx_km, double ly_km, int nx, int ny,
                             const std::vector<bool>& mask) {
  if (nx < 2 || ny < 2) throw Error("grid resolution must be at least 2x2");
  if (!(lx_km > 0.0) || !(ly_km > 0.0)) throw Error("grid extent must be positive");
  if (mask.size() != static_cast<std::size_t>(nx) * ny)
    throw Error("mask size does not match grid resolution");

  DomainGrid g;
  g.nx_ = nx;
  g.ny_ = ny;
  g.lx_ = lx_km;
  g.ly_ = ly_km;
  g.dx_ = lx_km / nx;
  g.dy_ = ly_km / ny;
  g.index_of_.assign(mask.size(), -1);
  for (int id = 0; id < nx * ny; ++id) {
    if (mask[id]) {
      g.index_of_[id] = static_cast<int>(g.active_ids_.size());
      g.active_ids_.push_back(id);
    }
  }
  if (g.active_ids_.empty()) throw Error("no active cells");

  g.neighbors_.resize(g.active_ids_.size());
  for (std::size_t a = 0; a < g.active_ids_.size(); ++a) {
    const int id = g.active_ids_[a];
    const int i = id % nx;
    const int j = id / nx;
    auto at = [&](int ii, int jj) {
      if (ii < 0 || ii >= nx || jj < 0 || jj >= ny) return kNoNeighbor;
      return g.index_of_[jj * nx + ii];
    };
    g.neighbors_[a] = {at(i - 1, j), at(i + 1, j), at(i, j - 1), at(i, j + 1)};
  }

  // Edge connectivity of the active set.
  std::vector<char> seen(g.active_ids_.size(), 0);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = 1;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const auto a = frontier.front();
    frontier.pop();
    for (int nb : g.neighbors_[a]) {
      if (nb != kNoNeighbor && !seen[nb]) {
        seen[nb] = 1;
        ++reached;
        frontier.push(static_cast<std::size_t>(nb));
      }
    }
  }
  if (reached != g.active_ids_.size()) throw Error("disconnected domain");
  return g;
}

DomainGrid DomainGrid::build_full(double lx_km, double ly_km, int nx, int ny) {
  return build(lx_km, ly_km, nx, ny,
               std::vector<bool>(static_cast<std::size_t>(std::max(nx, 0)) * std::max(ny, 0), true));
}

bool DomainGrid::is_active(int cell_id) const { return active_index(cell_id).has_value(); }

std::optional<std::size_t> DomainGrid::active_index(int cell_id) const {
  if (cell_id < 0 || static_cast<std::size_t>(cell_id) >= index_of_.size()) return std::nullopt;
  const int a = index_of_[cell_id];
  if (a < 0) return std::nullopt;
  return static_cast<std::size_t>(a);
}

std::array<double, 2> DomainGrid::center(int cell_id) const {
  const int i = cell_id % nx_;
  const int j = cell_id / nx_;
  return {(i + 0.5) * dx_, (j + 0.5) * dy_};
}

std::optional<int> DomainGrid::cell_at(double x_km, double y_km) const {
  if (!(x_km >= 0.0 && x_km <= lx_ && y_km >= 0.0 && y_km <= ly_)) return std::nullopt;
  const int i = std::min(static_cast<int>(std::floor(x_km / dx_)), nx_ - 1);
  const int j = std::min(static_cast<int>(std::floor(y_km / dy_)), ny_ - 1);
  return j * nx_ + i;
}

std::string to_string(RegionKind kind) {
  return kind == RegionKind::pressure_output ? "pressure" : "sr";
}

bool Region::contains(std::size_t active) const {
  return std::binary_search(cells.begin(), cells.end(), active);
}

namespace {

// Sorted unique ids mapped to active indices; throws on inactive cells.
std::pair<std::vector<int>, std::vector<std::size_t>> resolve_cells(const DomainGrid& grid,
                                                                    std::vector<int> ids,
                                                                    const char* what) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<std::size_t> cells;
  cells.reserve(ids.size());
  for (int id : ids) {
    auto a = grid.active_index(id);
    if (!a) throw Error(std::string(what) + " contains inactive cell " + std::to_string(id));
    cells.push_back(*a);
  }
  // Active indices are monotone in cell id, so `cells` is sorted too.
  return {std::move(ids), std::move(cells)};
}

bool intersects(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return true;
    if (*i < *j) ++i; else ++j;
  }
  return false;
}

}  // namespace

const Region& RegionSet::define_region(const DomainGrid& grid, std::vector<int> cell_ids,
                                       RegionKind kind) {
  if (cell_ids.empty()) throw Error("empty region");
  auto [ids, cells] = resolve_cells(grid, std::move(cell_ids), "region");
  for (const auto* list : {&pressure_, &sr_}) {
    for (const auto& r : *list) {
      if (intersects(r.cells, cells)) throw AssumptionError("regions must be disjoint (A4)");
    }
  }
  Region region;
  region.volume = static_cast<double>(cells.size()) * grid.cell_area();
  region.cell_ids = std::move(ids);
  region.cells = std::move(cells);
  region.kind = kind;
  auto& list = kind == RegionKind::pressure_output ? pressure_ : sr_;
  list.push_back(std::move(region));
  return list.back();
}

std::vector<const Region*> RegionSet::ordered() const {
  std::vector<const Region*> out;
  out.reserve(m());
  for (const auto& r : pressure_) out.push_back(&r);
  for (const auto& r : sr_) out.push_back(&r);
  return out;
}

ScalarField make_well_indicator(const DomainGrid& grid, std::span<const int> support_cell_ids) {
  if (support_cell_ids.empty()) throw Error("empty well support");
  auto [ids, cells] = resolve_cells(
      grid, std::vector<int>(support_cell_ids.begin(), support_cell_ids.end()), "well support");
  const double support_volume = static_cast<double>(cells.size()) * grid.cell_area();
  ScalarField b = grid.make_field();
  for (auto a : cells) b[a] = 1.0 / support_volume;
  return b;
}

const Well& WellSet::add(const DomainGrid& grid, std::vector<int> support_cell_ids) {
  if (support_cell_ids.empty()) throw Error("empty well support");
  auto [ids, cells] = resolve_cells(grid, std::move(support_cell_ids), "well support");
  Well w;
  w.support_volume = static_cast<double>(cells.size()) * grid.cell_area();
  w.cell_ids = std::move(ids);
  w.cells = std::move(cells);
  wells_.push_back(std::move(w));
  return wells_.back();
}

ScalarField WellSet::indicator(const DomainGrid& grid, std::size_t i) const {
  return make_well_indicator(grid, wells_.at(i).cell_ids);
}

double WellSet::min_support_volume() const {
  double v = INFINITY;
  for (const auto& w : wells_) v = std::min(v, w.support_volume);
  return v;
}

bool well_inside(const Well& well, const Region& region) {
  return std::includes(region.cells.begin(), region.cells.end(), well.cells.begin(),
                       well.cells.end());
}

AssumptionReport check_assumption_a4(const RegionSet& regions, const WellSet& wells) {
  AssumptionReport report;
  auto fail = [&](std::string msg) {
    report.pass = false;
    report.failures.push_back(std::move(msg));
  };

  const auto ordered = regions.ordered();
  auto label = [&](std::size_t k) {
    const auto& r = *ordered[k];
    const std::size_t local = r.kind == RegionKind::pressure_output ? k : k - regions.m_u();
    return to_string(r.kind) + " region " + std::to_string(local);
  };

  for (std::size_t a = 0; a < ordered.size(); ++a)
    for (std::size_t b = a + 1; b < ordered.size(); ++b)
      if (intersects(ordered[a]->cells, ordered[b]->cells))
        fail("regions must be disjoint (A4): " + label(a) + " overlaps " + label(b));

  if (regions.m() > wells.size())
    fail("more outputs than inputs: m = " + std::to_string(regions.m()) +
         " > n = " + std::to_string(wells.size()));
  if (regions.m() == 0) fail("no output regions defined");

  // Well -> containing region (or none).
  std::vector<int> owner(wells.size(), -1);
  for (std::size_t k = 0; k < ordered.size(); ++k) {
    bool has_well = false;
    for (std::size_t w = 0; w < wells.size(); ++w) {
      if (well_inside(wells[w], *ordered[k])) {
        has_well = true;
        if (owner[w] < 0) owner[w] = static_cast<int>(k);
      }
    }
    if (!has_well) fail(label(k) + " contains no well support");
  }

  for (std::size_t i = 0; i < wells.size(); ++i)
    for (std::size_t j = i + 1; j < wells.size(); ++j)
      if (owner[i] >= 0 && owner[j] >= 0 && owner[i] != owner[j] &&
          intersects(wells[i].cells, wells[j].cells))
        fail("wells " + std::to_string(i) + " and " + std::to_string(j) +
             " in distinct regions share support cells");
  return report;
}

}  // namespace ressim
