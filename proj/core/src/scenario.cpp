#include "ressim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "ressim/csv.hpp"
#include "ressim/error.hpp"
#include "toml.hpp"

namespace ressim {

// ---------------------------------------------------------------- references

double reference_at(const ReferenceSpec& spec, double y0, double t) {
  if (!(t >= 0.0)) throw Error("reference time must be non-negative");
  if (spec.kind == ReferenceSpec::Kind::constant) return spec.target;
  if (!(spec.tau > 0.0)) throw Error("sigmoid tau must be positive");
  auto s = [&](double x) { return 1.0 / (1.0 + std::exp(-(x - spec.t_mid) / spec.tau)); };
  const double s0 = s(0.0);
  return y0 + (spec.target - y0) * (s(t) - s0) / (1.0 - s0);
}

// -------------------------------------------------------------------- demand

DemandSeries::DemandSeries(std::vector<double> t_years, std::vector<double> values)
    : t_(std::move(t_years)), v_(std::move(values)) {
  if (t_.empty()) throw Error("empty demand series");
  if (t_.size() != v_.size()) throw Error("demand series time and value counts differ");
  for (std::size_t i = 0; i < t_.size(); ++i) {
    if (!std::isfinite(t_[i]) || !std::isfinite(v_[i])) throw Error("non-finite demand sample");
    if (i > 0 && !(t_[i] > t_[i - 1])) throw Error("demand series times must increase");
  }
}

DemandSeries DemandSeries::from_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const auto tc = table.column("t_years");
  const auto vc = table.column("value");
  std::vector<double> t, v;
  for (const auto& row : table.rows) {
    t.push_back(row[tc]);
    v.push_back(row[vc]);
  }
  try {
    return DemandSeries(std::move(t), std::move(v));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

double DemandSeries::at(double t) const {
  if (t_.empty()) throw Error("empty demand series");
  const auto it = std::upper_bound(t_.begin(), t_.end(), t);
  if (it == t_.begin()) return v_.front();
  return v_[static_cast<std::size_t>(it - t_.begin()) - 1];
}

Vector demand_at(const DemandSeries& series, const std::vector<double>& scales, double t) {
  const double f = series.at(t);
  Vector d(static_cast<Eigen::Index>(scales.size()));
  for (std::size_t k = 0; k < scales.size(); ++k) d[static_cast<Eigen::Index>(k)] = scales[k] * f;
  return d;
}

Matrix build_demand_weights(const DemandSpec& spec, std::size_t n_wells, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  // 53 random bits -> [0, 1); identical on every platform, unlike
  // std::uniform_real_distribution.
  auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  Matrix w = Matrix::Zero(static_cast<Eigen::Index>(spec.rows.size()),
                          static_cast<Eigen::Index>(n_wells));
  for (std::size_t k = 0; k < spec.rows.size(); ++k) {
    const auto& row = spec.rows[k];
    if (!row.weights.empty() && row.weights.size() != row.wells.size())
      throw ConfigError("demand row " + std::to_string(k) + ": weights and wells differ in length");
    for (std::size_t j = 0; j < row.wells.size(); ++j) {
      const int well = row.wells[j];
      if (well < 0 || static_cast<std::size_t>(well) >= n_wells)
        throw ConfigError("demand row " + std::to_string(k) + ": well index " +
                          std::to_string(well) + " out of range");
      const double value = row.weights.empty()
                               ? spec.weight_min + (spec.weight_max - spec.weight_min) * uniform()
                               : row.weights[j];
      w(static_cast<Eigen::Index>(k), well) = value;
    }
  }
  return w;
}

// --------------------------------------------------------------- TOML parsing

namespace {

std::string where(const toml::node& node) {
  const auto& src = node.source();
  return "line " + std::to_string(src.begin.line);
}

const toml::node& need(const toml::table& t, std::string_view key, std::string_view ctx) {
  const toml::node* node = t.get(key);
  if (!node) throw ConfigError("missing key '" + std::string(key) + "' in [" + std::string(ctx) + "]");
  return *node;
}

double as_double(const toml::node& node, std::string_view key) {
  if (auto v = node.value<double>()) return *v;
  throw ConfigError(where(node) + ": '" + std::string(key) + "' must be a number");
}

double get_double(const toml::table& t, std::string_view key, std::string_view ctx) {
  return as_double(need(t, key, ctx), key);
}

double get_double(const toml::table& t, std::string_view key, double fallback) {
  const toml::node* node = t.get(key);
  return node ? as_double(*node, key) : fallback;
}

std::optional<double> get_optional_double(const toml::table& t, std::string_view key) {
  const toml::node* node = t.get(key);
  if (!node) return std::nullopt;
  return as_double(*node, key);
}

std::int64_t as_int(const toml::node& node, std::string_view key) {
  if (const auto* i = node.as_integer()) return i->get();
  throw ConfigError(where(node) + ": '" + std::string(key) + "' must be an integer");
}

std::int64_t get_int(const toml::table& t, std::string_view key, std::string_view ctx) {
  return as_int(need(t, key, ctx), key);
}

std::string get_string(const toml::table& t, std::string_view key, std::string_view ctx) {
  const auto& node = need(t, key, ctx);
  if (const auto* s = node.as_string()) return s->get();
  throw ConfigError(where(node) + ": '" + std::string(key) + "' must be a string");
}

std::string get_string_or(const toml::table& t, std::string_view key, const std::string& fallback) {
  return t.get(key) ? get_string(t, key, std::string_view()) : fallback;
}

const toml::table& need_table(const toml::table& t, std::string_view key) {
  const auto& node = need(t, key, "root");
  if (const auto* tbl = node.as_table()) return *tbl;
  throw ConfigError(where(node) + ": '" + std::string(key) + "' must be a table");
}

const toml::array* get_array(const toml::table& t, std::string_view key) {
  const toml::node* node = t.get(key);
  if (!node) return nullptr;
  if (const auto* arr = node->as_array()) return arr;
  throw ConfigError(where(*node) + ": '" + std::string(key) + "' must be an array");
}

const toml::table& element_table(const toml::node& node, std::string_view ctx) {
  if (const auto* tbl = node.as_table()) return *tbl;
  throw ConfigError(where(node) + ": entries of '" + std::string(ctx) + "' must be tables");
}

std::vector<double> double_list(const toml::array& arr, std::string_view key) {
  std::vector<double> out;
  for (const auto& e : arr) out.push_back(as_double(e, key));
  return out;
}

BoundaryKind parse_bc(const std::string& s) {
  if (s == "neumann") return BoundaryKind::neumann;
  if (s == "dirichlet") return BoundaryKind::dirichlet;
  throw ConfigError("unknown boundary condition '" + s + "' (expected neumann or dirichlet)");
}

ReferenceSpec parse_reference(const toml::table& t) {
  ReferenceSpec r;
  const std::string kind = get_string_or(t, "kind", std::string("constant"));
  if (kind == "constant") {
    r.kind = ReferenceSpec::Kind::constant;
  } else if (kind == "sigmoid") {
    r.kind = ReferenceSpec::Kind::sigmoid;
    r.t_mid = get_double(t, "t_mid", "references");
    r.tau = get_double(t, "tau", "references");
  } else {
    throw ConfigError(where(t) + ": unknown reference kind '" + kind + "'");
  }
  r.target = get_double(t, "target", "references");
  return r;
}

std::vector<ReferenceSpec> parse_reference_list(const toml::table& refs, std::string_view key) {
  std::vector<ReferenceSpec> out;
  if (const auto* arr = get_array(refs, key))
    for (const auto& e : *arr) out.push_back(parse_reference(element_table(e, key)));
  return out;
}

ScenarioConfig parse_table(const toml::table& root, const std::filesystem::path& base_dir) {
  ScenarioConfig c;
  c.base_dir = base_dir;
  c.name = get_string_or(root, "name", std::string("scenario"));

  const auto& grid = need_table(root, "grid");
  c.grid.lx = get_double(grid, "lx_km", "grid");
  c.grid.ly = get_double(grid, "ly_km", "grid");
  c.grid.nx = static_cast<int>(get_int(grid, "nx", "grid"));
  c.grid.ny = static_cast<int>(get_int(grid, "ny", "grid"));
  const std::string mask = get_string_or(grid, "mask", std::string("full"));
  if (mask == "ellipse") {
    c.grid.mask.kind = MaskSpec::Kind::ellipse;
    c.grid.mask.cx = get_double(grid, "ellipse_cx_km", "grid");
    c.grid.mask.cy = get_double(grid, "ellipse_cy_km", "grid");
    c.grid.mask.ax = get_double(grid, "ellipse_ax_km", "grid");
    c.grid.mask.ay = get_double(grid, "ellipse_ay_km", "grid");
  } else if (mask != "full") {
    throw ConfigError(where(grid) + ": unknown mask '" + mask + "'");
  }

  const auto& wells = need_table(root, "wells");
  const auto* positions = get_array(wells, "positions_km");
  if (!positions) throw ConfigError("missing key 'positions_km' in [wells]");
  const double radius = get_double(wells, "support_radius_km", 0.0);
  for (const auto& e : *positions) {
    const auto* pair = e.as_array();
    if (!pair || pair->size() != 2)
      throw ConfigError(where(e) + ": well positions must be [x, y] pairs");
    c.wells.push_back({as_double(*pair->get(0), "x"), as_double(*pair->get(1), "y"), radius});
  }

  const auto* regions = root.get("regions");
  if (!regions || !regions->as_array()) throw ConfigError("missing [[regions]] entries");
  for (const auto& e : *regions->as_array()) {
    const auto& t = element_table(e, "regions");
    RegionSpec r;
    r.name = get_string_or(t, "name", "region " + std::to_string(c.regions.size()));
    const std::string kind = get_string(t, "kind", "regions");
    if (kind == "pressure") r.kind = RegionKind::pressure_output;
    else if (kind == "sr") r.kind = RegionKind::sr_output;
    else throw ConfigError(where(t) + ": region kind must be 'pressure' or 'sr'");
    if (const auto* rect = get_array(t, "rect_km")) {
      const auto v = double_list(*rect, "rect_km");
      if (v.size() != 4) throw ConfigError(where(t) + ": rect_km must be [x0, y0, x1, y1]");
      r.x0 = v[0], r.y0 = v[1], r.x1 = v[2], r.y1 = v[3];
    } else if (const auto* rem = t.get("remainder"); rem && rem->value<bool>().value_or(false)) {
      r.remainder = true;
    } else {
      throw ConfigError(where(t) + ": region needs rect_km or remainder = true");
    }
    c.regions.push_back(r);
  }

  const auto& diff = need_table(root, "diffusion");
  c.diffusion.beta = get_double(diff, "beta", "diffusion");
  if (auto hr = get_optional_double(diff, "c_hy_km2_per_hr")) c.diffusion.c_hy = *hr * kHoursPerYear;
  else c.diffusion.c_hy = get_double(diff, "c_hy_km2_per_yr", "diffusion");
  c.diffusion.bc = parse_bc(get_string_or(diff, "bc", std::string("neumann")));
  c.diffusion.theta = get_double(diff, "theta", 1.0);
  c.diffusion.saturation = get_optional_double(diff, "saturation");

  const auto& sr = need_table(root, "sr");
  c.sr.gamma1_max = get_double(sr, "gamma1_max", "sr");
  c.sr.gamma2 = get_double(sr, "gamma2", "sr");
  c.sr.r_star = get_double(sr, "r_star", "sr");
  c.sr.r0_factor = get_double(sr, "r0_factor", 1.0);
  if (const auto* dn = sr.get("density")) {
    const auto* dt = dn->as_table();
    if (!dt) throw ConfigError(where(*dn) + ": sr.density must be a table");
    const std::string kind = get_string(*dt, "kind", "sr.density");
    if (kind == "uniform") {
      c.sr.density.kind = DensitySpec::Kind::uniform;
    } else if (kind == "gaussian") {
      c.sr.density.kind = DensitySpec::Kind::gaussian;
      c.sr.density.cx = get_double(*dt, "cx_km", "sr.density");
      c.sr.density.cy = get_double(*dt, "cy_km", "sr.density");
      c.sr.density.sigma = get_double(*dt, "sigma_km", "sr.density");
      c.sr.density.floor = get_double(*dt, "floor", 0.0);
    } else if (kind == "csv") {
      c.sr.density.kind = DensitySpec::Kind::csv;
      c.sr.density.path = get_string(*dt, "path", "sr.density");
      c.sr.density.floor = get_double(*dt, "floor", 0.0);
    } else {
      throw ConfigError(where(*dt) + ": unknown density kind '" + kind + "'");
    }
  }

  const auto& ctl = need_table(root, "controller");
  c.controller.l = get_double(ctl, "l", "controller");
  c.controller.k_bar2 = get_double(ctl, "k_bar2", "controller");
  c.controller.b = get_double(ctl, "b", 1.0);
  c.controller.delta_b = get_double(ctl, "delta_b", 0.0);
  c.controller.margin = get_double(ctl, "margin", 2.22);
  c.controller.alpha1 = get_double(ctl, "alpha1", 0.3);
  c.controller.alpha2 = get_double(ctl, "alpha2", 80.0);
  c.controller.gamma_r = get_double(ctl, "gamma_r", 0.0);
  c.controller.safety = get_double(ctl, "safety", 1.1);
  c.controller.gamma1_0_rstar_0 = get_optional_double(ctl, "gamma1_0_rstar_0");

  const auto& refs = need_table(root, "references");
  c.pressure_refs = parse_reference_list(refs, "pressure");
  c.sr_refs = parse_reference_list(refs, "sr");

  if (const auto* dn = root.get("demand")) {
    const auto* dt = dn->as_table();
    if (!dt) throw ConfigError(where(*dn) + ": [demand] must be a table");
    DemandSpec d;
    d.series_path = get_string(*dt, "series", "demand");
    d.weight_min = get_double(*dt, "weight_min", 0.8);
    d.weight_max = get_double(*dt, "weight_max", 1.2);
    const auto* rows = get_array(*dt, "rows");
    if (!rows || rows->empty()) throw ConfigError(where(*dt) + ": [demand] needs at least one row");
    for (const auto& e : *rows) {
      const auto& rt = element_table(e, "demand.rows");
      DemandRowSpec row;
      row.scale = get_double(rt, "scale", "demand.rows");
      if (const auto* range = get_array(rt, "well_range")) {
        if (range->size() != 2) throw ConfigError(where(rt) + ": well_range must be [first, last]");
        const auto first = as_int(*range->get(0), "well_range");
        const auto last = as_int(*range->get(1), "well_range");
        if (last < first) throw ConfigError(where(rt) + ": well_range is empty");
        for (auto j = first; j <= last; ++j) row.wells.push_back(static_cast<int>(j));
      } else if (const auto* list = get_array(rt, "wells")) {
        for (const auto& w : *list) row.wells.push_back(static_cast<int>(as_int(w, "wells")));
      } else {
        throw ConfigError(where(rt) + ": demand row needs well_range or wells");
      }
      if (const auto* weights = get_array(rt, "weights")) row.weights = double_list(*weights, "weights");
      d.rows.push_back(std::move(row));
    }
    c.demand = std::move(d);
  }

  const auto& sched = need_table(root, "schedule");
  c.schedule.t_end = get_double(sched, "t_end", "schedule");
  c.schedule.dt = get_double(sched, "dt", "schedule");
  c.schedule.dt_c = get_double(sched, "dt_c", c.schedule.dt);
  if (const auto* seed = sched.get("seed")) {
    const auto v = as_int(*seed, "seed");
    if (v < 0) throw ConfigError(where(*seed) + ": seed must be non-negative");
    c.schedule.seed = static_cast<std::uint64_t>(v);
  }
  if (const auto* th = sched.get("threads")) c.schedule.threads = static_cast<int>(as_int(*th, "threads"));
  return c;
}

ScenarioConfig parse_impl(std::string_view text, const std::string& source,
                          const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ":" << e.source().begin.line << ":" << e.source().begin.column << ": "
       << e.description();
    throw ConfigError(os.str());
  }
  try {
    return parse_table(root, base_dir);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what(), e.assumption());
  }
}

}  // namespace

ScenarioConfig parse_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_impl(buf.str(), path.string(), path.parent_path());
}

ScenarioConfig parse_scenario_string(const std::string& toml, const std::filesystem::path& base_dir) {
  return parse_impl(toml, "<string>", base_dir);
}

void apply_overrides(ScenarioConfig& config, const Overrides& o) {
  if (o.seed) config.schedule.seed = *o.seed;
  if (o.dt) {
    if (!(*o.dt > 0.0) || !std::isfinite(*o.dt)) throw ConfigError("dt must be positive");
    if (config.schedule.dt_c == config.schedule.dt) config.schedule.dt_c = *o.dt;
    config.schedule.dt = *o.dt;
  }
  if (o.grid) {
    if (o.grid->first < 2 || o.grid->second < 2) throw ConfigError("grid resolution must be at least 2x2");
    config.grid.nx = o.grid->first;
    config.grid.ny = o.grid->second;
  }
  if (o.threads) {
    if (*o.threads < 1) throw ConfigError("threads must be at least 1");
    config.schedule.threads = *o.threads;
  }
  if (o.bc) config.diffusion.bc = *o.bc;
}

// --------------------------------------------------------------------- model

DomainGrid build_grid(const GridSpec& spec) {
  if (spec.nx < 2 || spec.ny < 2) throw ConfigError("grid resolution must be at least 2x2");
  if (!(spec.lx > 0.0) || !(spec.ly > 0.0)) throw ConfigError("grid extent must be positive");
  if (spec.mask.kind == MaskSpec::Kind::full) return DomainGrid::build_full(spec.lx, spec.ly, spec.nx, spec.ny);
  const auto& m = spec.mask;
  if (!(m.ax > 0.0) || !(m.ay > 0.0)) throw ConfigError("ellipse semi-axes must be positive");
  std::vector<bool> mask(static_cast<std::size_t>(spec.nx) * spec.ny);
  const double dx = spec.lx / spec.nx, dy = spec.ly / spec.ny;
  for (int j = 0; j < spec.ny; ++j)
    for (int i = 0; i < spec.nx; ++i) {
      const double ex = ((i + 0.5) * dx - m.cx) / m.ax;
      const double ey = ((j + 0.5) * dy - m.cy) / m.ay;
      mask[static_cast<std::size_t>(j) * spec.nx + i] = ex * ex + ey * ey <= 1.0;
    }
  return DomainGrid::build(spec.lx, spec.ly, spec.nx, spec.ny, mask);
}

ScalarField build_density(const DensitySpec& spec, const DomainGrid& grid,
                          const std::filesystem::path& base_dir) {
  switch (spec.kind) {
    case DensitySpec::Kind::uniform:
      return grid.make_field(1.0);
    case DensitySpec::Kind::gaussian: {
      if (!(spec.sigma > 0.0)) throw ConfigError("density sigma must be positive", "A3");
      ScalarField d = grid.make_field();
      for (std::size_t a = 0; a < d.size(); ++a) {
        const auto c = grid.center(grid.cell_id_of(a));
        const double r2 = (c[0] - spec.cx) * (c[0] - spec.cx) + (c[1] - spec.cy) * (c[1] - spec.cy);
        d[a] = spec.floor + (1.0 - spec.floor) * std::exp(-0.5 * r2 / (spec.sigma * spec.sigma));
      }
      return normalize_max(std::move(d));
    }
    case DensitySpec::Kind::csv: {
      const auto path = spec.path.is_absolute() ? spec.path : base_dir / spec.path;
      return load_density_csv(path, grid, spec.floor);
    }
  }
  throw ConfigError("unknown density kind");
}

namespace {

std::vector<int> rect_cells(const DomainGrid& grid, const RegionSpec& r) {
  std::vector<int> ids;
  for (std::size_t a = 0; a < grid.active_count(); ++a) {
    const int id = grid.cell_id_of(a);
    const auto c = grid.center(id);
    if (c[0] >= r.x0 && c[0] <= r.x1 && c[1] >= r.y0 && c[1] <= r.y1) ids.push_back(id);
  }
  return ids;
}

std::vector<int> well_cells(const DomainGrid& grid, const WellSpec& w, std::size_t index) {
  std::vector<int> ids;
  if (w.radius > 0.0) {
    for (std::size_t a = 0; a < grid.active_count(); ++a) {
      const int id = grid.cell_id_of(a);
      const auto c = grid.center(id);
      if (std::hypot(c[0] - w.x, c[1] - w.y) <= w.radius) ids.push_back(id);
    }
  } else if (auto id = grid.cell_at(w.x, w.y); id && grid.is_active(*id)) {
    ids.push_back(*id);
  }
  if (ids.empty())
    throw ConfigError("well " + std::to_string(index) + " at (" + format_double(w.x) + ", " +
                      format_double(w.y) + ") km has no active support cell");
  return ids;
}

double min_sr_well_volume(const Model& m) {
  double v = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < m.wells.size(); ++j)
    for (const auto& r : m.regions.sr())
      if (well_inside(m.wells[j], r)) v = std::min(v, m.wells[j].support_volume);
  return std::isfinite(v) ? v : m.wells.min_support_volume();
}

}  // namespace

std::unique_ptr<Model> build_model(const ScenarioConfig& c) {
  auto m = std::make_unique<Model>();
  try {
    m->grid = build_grid(c.grid);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  // Rectangles first so the remainder region can exclude them.
  std::set<int> claimed;
  std::vector<std::pair<const RegionSpec*, std::vector<int>>> cells;
  for (const auto& r : c.regions) {
    if (r.remainder) continue;
    auto ids = rect_cells(m->grid, r);
    if (ids.empty()) throw ConfigError("region '" + r.name + "' covers no active cell", "A4");
    claimed.insert(ids.begin(), ids.end());
    cells.emplace_back(&r, std::move(ids));
  }
  for (const auto& r : c.regions) {
    if (!r.remainder) continue;
    std::vector<int> ids;
    for (std::size_t a = 0; a < m->grid.active_count(); ++a)
      if (!claimed.count(m->grid.cell_id_of(a))) ids.push_back(m->grid.cell_id_of(a));
    if (ids.empty()) throw ConfigError("remainder region '" + r.name + "' is empty", "A4");
    claimed.insert(ids.begin(), ids.end());
    cells.emplace_back(&r, std::move(ids));
  }
  std::vector<std::string> p_names, r_names;
  for (auto& [spec, ids] : cells) {
    try {
      m->regions.define_region(m->grid, std::move(ids), spec->kind);
    } catch (const AssumptionError& e) {
      throw AssumptionError("region '" + spec->name + "': " + e.what());
    } catch (const Error& e) {
      throw ConfigError("region '" + spec->name + "': " + e.what(), "A4");
    }
    (spec->kind == RegionKind::pressure_output ? p_names : r_names).push_back(spec->name);
  }
  m->region_names = p_names;
  m->region_names.insert(m->region_names.end(), r_names.begin(), r_names.end());

  for (std::size_t j = 0; j < c.wells.size(); ++j) m->wells.add(m->grid, well_cells(m->grid, c.wells[j], j));
  if (m->wells.size() == 0) throw ConfigError("no wells defined", "A4");

  const auto& d = c.diffusion;
  if (!(d.beta > 0.0)) throw ConfigError("beta must be positive", "A3");
  if (!(d.c_hy > 0.0)) throw ConfigError("hydraulic diffusivity must be positive", "A3");
  m->diffusion = DiffusionParams::uniform(m->grid, d.beta, d.c_hy, d.bc);
  m->diffusion.theta = d.theta;
  m->diffusion.saturation = d.saturation;

  const auto density = build_density(c.sr.density, m->grid, c.base_dir);
  m->sr = SrParams::from_density(density, c.sr.gamma1_max, c.sr.gamma2, c.sr.r_star);
  m->r0_factor = c.sr.r0_factor;

  m->outputs.regions = m->regions;
  const auto& ctl = c.controller;
  try {
    if (ctl.gamma1_0_rstar_0) {
      m->nominals.beta0 = 0.8 * d.beta;
      m->nominals.gamma1_0_rstar_0 = *ctl.gamma1_0_rstar_0;
      if (!(m->nominals.gamma1_0_rstar_0 > 0.0)) throw Error("gamma1_0_rstar_0 must be positive");
    } else {
      m->nominals = select_nominals(d.beta, c.sr.gamma1_max, ctl.gamma_r, min_sr_well_volume(*m), ctl.safety);
    }
    m->gains = design_gains(ctl.k_bar2, ctl.l, ctl.b, ctl.delta_b, ctl.margin);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("controller: ") + e.what());
  }
  if (!(ctl.alpha1 >= 0.0) || !(ctl.alpha2 > 0.0))
    throw ConfigError("controller: alpha1 must be non-negative and alpha2 positive");
  m->gains.alpha1 = ctl.alpha1;
  m->gains.alpha2 = ctl.alpha2;
  m->outputs.gamma1_0_rstar_0 = m->nominals.gamma1_0_rstar_0;
  m->b0 = build_B0(m->outputs, m->wells, m->nominals.beta0);

  if (c.demand) {
    const auto path = c.demand->series_path.is_absolute() ? c.demand->series_path
                                                           : c.base_dir / c.demand->series_path;
    try {
      m->series = DemandSeries::from_csv(path);
    } catch (const Error& e) {
      throw ConfigError(e.what(), "A1");
    }
    m->w = build_demand_weights(*c.demand, m->wells.size(), c.schedule.seed);
    for (const auto& row : c.demand->rows) m->demand_scales.push_back(row.scale);
  }
  return m;
}

// ---------------------------------------------------------------- validation

bool ValidationReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

const AssumptionCheck* ValidationReport::first_failure() const {
  for (const auto& c : checks)
    if (!c.pass) return &c;
  return nullptr;
}

ValidationReport validate(const ScenarioConfig& c) {
  ValidationReport report;
  report.checks = {{"schedule", true, {}}, {"A1", true, {}}, {"A2", true, {}},
                   {"A3", true, {}},       {"A4", true, {}}};
  auto fail = [&](const std::string& name, const std::string& msg) {
    for (auto& ch : report.checks)
      if (ch.name == name) {
        ch.pass = false;
        ch.messages.push_back(msg);
        return;
      }
    report.checks.push_back({name, false, {msg}});
  };

  const auto& s = c.schedule;
  if (!(s.t_end > 0.0)) fail("schedule", "t_end must be positive");
  if (!(s.dt > 0.0)) fail("schedule", "dt must be positive");
  if (!(s.dt_c >= s.dt)) fail("schedule", "dt_c must be at least dt");
  if (s.dt > 0.0 && s.dt_c >= s.dt) {
    const double ratio = s.dt_c / s.dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) fail("schedule", "dt_c must be a multiple of dt");
  }
  if (s.threads < 1) fail("schedule", "threads must be at least 1");

  if (c.diffusion.saturation && !(*c.diffusion.saturation > 0.0))
    fail("A1", "input saturation bound must be positive");

  std::size_t n_p = 0, n_r = 0;
  for (const auto& r : c.regions) (r.kind == RegionKind::pressure_output ? n_p : n_r)++;
  if (c.pressure_refs.size() != n_p)
    fail("A2", "expected " + std::to_string(n_p) + " pressure references, found " +
                   std::to_string(c.pressure_refs.size()));
  if (c.sr_refs.size() != n_r)
    fail("A2", "expected " + std::to_string(n_r) + " SR references, found " +
                   std::to_string(c.sr_refs.size()));
  for (const auto* list : {&c.pressure_refs, &c.sr_refs})
    for (const auto& r : *list) {
      if (!std::isfinite(r.target)) fail("A2", "reference target must be finite");
      if (r.kind == ReferenceSpec::Kind::sigmoid && !(r.tau > 0.0)) fail("A2", "sigmoid tau must be positive");
      if (r.kind == ReferenceSpec::Kind::sigmoid && !std::isfinite(r.t_mid)) fail("A2", "sigmoid t_mid must be finite");
    }

  if (!(c.diffusion.beta > 0.0)) fail("A3", "beta must be positive");
  if (!(c.diffusion.c_hy > 0.0)) fail("A3", "hydraulic diffusivity must be positive");
  if (!(c.diffusion.theta >= 0.5 && c.diffusion.theta <= 1.0)) fail("A3", "theta must lie in [0.5, 1]");
  if (!(c.sr.r0_factor > 0.0)) fail("A3", "initial SR factor must be positive");

  std::unique_ptr<Model> model;
  try {
    model = build_model(c);
  } catch (const ConfigError& e) {
    fail(e.assumption().empty() ? "config" : e.assumption(), e.what());
  } catch (const Error& e) {
    fail("config", e.what());
  }
  if (!model) return report;

  for (const auto& msg : check_sr_params(model->sr)) fail("A3", msg);

  const auto a4 = check_assumption_a4(model->regions, model->wells);
  for (const auto& msg : a4.failures) fail("A4", msg);
  if (a4.pass) {
    try {
      InputAllocator alloc(model->b0, model->w);
      (void)alloc;
    } catch (const Error& e) {
      fail("A4", e.what());
    }
  }

  if (c.diffusion.saturation && model->w.rows() > 0 && !model->series.empty()) {
    const Matrix wwt = model->w * model->w.transpose();
    const Matrix wp = model->w.transpose() * wwt.ldlt().solve(Matrix::Identity(wwt.rows(), wwt.cols()));
    double peak = 0.0;
    for (double t : model->series.times())
      peak = std::max(peak, (wp * demand_at(model->series, model->demand_scales, t)).norm());
    if (peak > *c.diffusion.saturation)
      fail("A1", "demand alone needs |Q| = " + format_double(peak) + " above the saturation bound");
  }
  return report;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  ScenarioConfig c = parse_scenario(path);
  const auto report = validate(c);
  if (const auto* f = report.first_failure()) {
    const std::string tag = f->name.size() == 2 && f->name[0] == 'A' ? f->name : std::string();
    std::string msg = path.string() + ": " + f->name + " check failed";
    if (!f->messages.empty()) msg += ": " + f->messages.front();
    throw ConfigError(msg, tag);
  }
  return c;
}

// ----------------------------------------------------------------------- run

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::closed_loop: return "closed_loop";
    case RunMode::demand_only: return "demand_only";
    case RunMode::zero_input: return "zero_input";
  }
  return "unknown";
}

RunRecord run(const ScenarioConfig& config, RunMode mode) {
  const auto report = validate(config);
  if (const auto* f = report.first_failure()) {
    const std::string tag = f->name.size() == 2 && f->name[0] == 'A' ? f->name : std::string();
    throw ConfigError(f->name + " check failed" + (f->messages.empty() ? "" : ": " + f->messages.front()), tag);
  }
  const auto model = build_model(config);
  return run(config, *model, mode);
}

namespace {

bool all_finite(const ScalarField& f) {
  return std::all_of(f.begin(), f.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

RunRecord run(const ScenarioConfig& config, const Model& model, RunMode mode) {
  const auto& sched = config.schedule;
  const double dt = sched.dt;
  const auto sub_steps = static_cast<std::size_t>(std::llround(sched.dt_c / dt));
  const auto periods = static_cast<std::size_t>(std::llround(sched.t_end / sched.dt_c));
  if (sub_steps == 0 || periods == 0) throw ConfigError("schedule yields no steps");
  const double dt_c = static_cast<double>(sub_steps) * dt;

  DiffusionSolver::set_threads(sched.threads);
  const DiffusionSolver solver(model.grid, model.diffusion, model.wells);
  const auto& grid = model.grid;
  const std::size_t n = model.wells.size();
  const std::size_t m = model.regions.m();
  const bool has_demand = model.w.rows() > 0;

  std::optional<InputAllocator> allocator;
  if (mode == RunMode::closed_loop) allocator.emplace(model.b0, model.w);
  Matrix w_pinv;
  if (has_demand) {
    const Matrix wwt = model.w * model.w.transpose();
    w_pinv = model.w.transpose() * wwt.ldlt().solve(Matrix::Identity(wwt.rows(), wwt.cols()));
  }

  PressureState p = PressureState::zero(grid);
  ScalarField r0 = model.sr.r_star;
  for (auto& v : r0) v *= model.r0_factor;
  SrState s = SrState::at_rate(r0);

  RunRecord rec;
  auto& meta = rec.meta;
  meta.scenario = config.name;
  meta.mode = mode;
  meta.bc = model.diffusion.bc;
  meta.beta = model.diffusion.beta;
  meta.volume = grid.volume();
  meta.dt = dt;
  meta.dt_c = dt_c;
  meta.t_end = dt_c * static_cast<double>(periods);
  meta.c_min = *std::min_element(model.diffusion.c_hy.begin(), model.diffusion.c_hy.end());
  meta.lx = grid.lx();
  meta.ly = grid.ly();
  meta.r_star = mean_over(model.sr.r_star, grid);
  meta.gamma1_max = model.sr.bounds.gamma1_max;
  meta.gamma2 = model.sr.gamma2;
  meta.r_star_min = model.sr.bounds.r_star_min;
  meta.r_star_max = model.sr.bounds.r_star_max;
  meta.gamma1_0_rstar_0 = model.outputs.gamma1_0_rstar_0;
  for (const auto& w : model.wells.wells()) meta.well_volumes.push_back(w.support_volume);
  meta.m_u = model.regions.m_u();
  meta.m_r = model.regions.m_r();
  meta.n = n;
  meta.n_r = static_cast<std::size_t>(model.w.rows());
  meta.region_names = model.region_names;
  meta.h0_u0 = h0_norm(p.u, grid);
  meta.mean_u0 = mean_over(p.u, grid);
  {
    ScalarField ku = grid.make_field();
    solver.apply_operator(p.u.values(), ku.values());
    meta.h0_ku0 = h0_norm(ku, grid);
  }
  meta.declared_saturation = model.diffusion.saturation;
  meta.gains = model.gains;

  const std::size_t samples = periods + 1;
  auto reserve = [&](auto& v) { v.reserve(samples); };
  reserve(rec.t), reserve(rec.y_u), reserve(rec.y_r), reserve(rec.r_u), reserve(rec.r_r);
  reserve(rec.sigma), reserve(rec.nu), reserve(rec.q), reserve(rec.demand), reserve(rec.wq);
  reserve(rec.mean_u), reserve(rec.mean_r), reserve(rec.h0_u), reserve(rec.h0_ut);
  reserve(rec.max_abs_ut), reserve(rec.min_log_r), reserve(rec.max_log_r);
  reserve(rec.cumulative_events), reserve(rec.mass_residual), reserve(rec.cg_iterations);

  ControllerState cs = ControllerState::zero(m);
  const Outputs y0 = compute_outputs(p.u, sr_field(s), grid, model.outputs);
  Vector r_u(static_cast<Eigen::Index>(model.regions.m_u()));
  Vector r_r(static_cast<Eigen::Index>(model.regions.m_r()));

  double residual = 0.0;
  int cg_total = 0;
  double events = 0.0;
  std::size_t step_index = 0;
  const double scale_q = 1.0 / (model.diffusion.beta * grid.volume());

  for (std::size_t k = 0; k <= periods; ++k) {
    const double t = dt_c * static_cast<double>(k);
    const ScalarField r_field = sr_field(s);
    const Outputs y = compute_outputs(p.u, r_field, grid, model.outputs);
    for (Eigen::Index i = 0; i < r_u.size(); ++i)
      r_u[i] = reference_at(config.pressure_refs[static_cast<std::size_t>(i)], y0.y_u[i], t);
    for (Eigen::Index i = 0; i < r_r.size(); ++i)
      r_r[i] = reference_at(config.sr_refs[static_cast<std::size_t>(i)], y0.y_r[i], t);
    cs.sigma = compute_error(y.y_u, y.y_r, r_u, r_r, model.outputs);

    Vector d = has_demand ? demand_at(model.series, model.demand_scales, t) : Vector();
    const Vector nu_used = cs.nu;
    Vector q = Vector::Zero(static_cast<Eigen::Index>(n));
    switch (mode) {
      case RunMode::closed_loop: {
        const Vector v = gsta_step(cs, model.gains, dt_c);
        q = allocator->allocate(v, has_demand ? std::optional<Vector>(d) : std::nullopt);
        break;
      }
      case RunMode::demand_only:
        if (has_demand) q = w_pinv * d;
        break;
      case RunMode::zero_input:
        break;
    }
    if (!q.allFinite()) throw SimulationError("non-finite control", step_index);

    const double mean_r = mean_over(r_field, grid);
    if (k > 0) events += 0.5 * (rec.mean_r.back() + mean_r) * dt_c;
    double min_h = std::numeric_limits<double>::infinity(), max_h = -min_h, max_ut = 0.0;
    for (double h : s.log_r) min_h = std::min(min_h, h), max_h = std::max(max_h, h);
    for (double v : p.u_t) max_ut = std::max(max_ut, std::abs(v));

    rec.t.push_back(t);
    rec.y_u.push_back(y.y_u);
    rec.y_r.push_back(y.y_r);
    rec.r_u.push_back(r_u);
    rec.r_r.push_back(r_r);
    rec.sigma.push_back(cs.sigma);
    rec.nu.push_back(nu_used);
    rec.q.push_back(q);
    rec.demand.push_back(d);
    rec.wq.push_back(has_demand ? Vector(model.w * q) : Vector());
    rec.mean_u.push_back(mean_over(p.u, grid));
    rec.mean_r.push_back(mean_r);
    rec.h0_u.push_back(h0_norm(p.u, grid));
    rec.h0_ut.push_back(h0_norm(p.u_t, grid));
    rec.max_abs_ut.push_back(max_ut);
    rec.min_log_r.push_back(min_h);
    rec.max_log_r.push_back(max_h);
    rec.cumulative_events.push_back(events);
    rec.mass_residual.push_back(residual);
    rec.cg_iterations.push_back(cg_total);
    if (k == periods) break;

    residual = 0.0;
    cg_total = 0;
    const double sum_q = q.sum();
    for (std::size_t sub = 0; sub < sub_steps; ++sub, ++step_index) {
      const double mean_before = mean_over(p.u, grid);
      StepInfo info;
      try {
        p = solver.step(p, std::span<const double>(q.data(), n), dt, &info);
        s = step_sr(s, model.sr, p.u_t, dt);
      } catch (const SimulationError&) {
        throw;
      } catch (const Error& e) {
        throw SimulationError(e.what(), step_index);
      }
      if (!all_finite(p.u) || !all_finite(s.log_r))
        throw SimulationError("non-finite state", step_index);
      cg_total += info.cg_iterations;
      if (model.diffusion.bc == BoundaryKind::neumann) {
        const double mean_after = mean_over(p.u, grid);
        const double r = std::abs(mean_after - mean_before - dt * sum_q * scale_q) /
                         std::max(1.0, std::abs(mean_before));
        residual = std::max(residual, r);
      }
    }
  }
  return rec;
}

}  // namespace ressim
