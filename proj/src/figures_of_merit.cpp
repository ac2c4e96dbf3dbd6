#include "iontrap/figures_of_merit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <utility>

#include <Eigen/Dense>
#include <fmt/core.h>

#include "iontrap/cache.hpp"
#include "iontrap/errors.hpp"

namespace iontrap {

namespace {

std::string um(const Vec3& p) { return fmt::format("({:.3f}, {:.3f}, {:.3f}) um", p.x() * 1e6, p.y() * 1e6, p.z() * 1e6); }

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput(fmt::format("{} must be positive (got {})", name, v));
}

struct Polished {
  Vec3 r;
  double psi;
  double grad_norm;
  int iterations;
};

// Gauss-Newton on E = 0 in the x-y plane with a backtracking guard on psi.
Polished polish_null(const PseudoField& field, Vec3 r, double max_step) {
  const double v = field.drive().voltage;
  const double a = field.energy_per_field2() * v * v;
  int it = 0;
  FieldSample s = field.source().sample(r, true);
  double psi = a * s.field.squaredNorm();
  for (; it < 60; ++it) {
    Eigen::Matrix<double, 3, 2> jp = s.jacobian.leftCols<2>();
    const Eigen::Matrix2d normal = jp.transpose() * jp;
    const Eigen::Vector2d rhs = -(jp.transpose() * s.field);
    Eigen::Vector2d delta = normal.ldlt().solve(rhs);
    if (!delta.allFinite()) break;
    if (delta.norm() > max_step) delta *= max_step / delta.norm();
    double scale = 1.0;
    bool moved = false;
    for (int back = 0; back < 40; ++back) {
      Vec3 trial = r;
      trial.head<2>() += scale * delta;
      const FieldSample ts = field.source().sample(trial, true);
      const double tpsi = a * ts.field.squaredNorm();
      if (tpsi <= psi) {
        moved = trial != r;
        r = trial;
        s = ts;
        psi = tpsi;
        break;
      }
      scale *= 0.5;
    }
    if (!moved || scale * delta.norm() < 1e-13) break;
  }
  const Vec3 grad = 2.0 * a * s.jacobian.transpose() * s.field;
  return {r, psi, grad.norm(), it};
}

}  // namespace

// ---------------------------------------------------------------- rf null

NullSearchRegion default_null_region(const TrapGeometry& g) {
  NullSearchRegion region;
  const double bottom = g.bottom_wafer_height();
  const double top = g.top_wafer_height();
  const double margin = region.scan_step;
  const double hi = top > bottom + 4.0 * margin ? top - margin : g.fine_region.hi.y();
  region.box.lo = Vec3(0.0, bottom + margin, 0.0);
  region.box.hi = Vec3(0.0, hi, 0.0);
  region.reference_height = bottom;
  return region;
}

NullResult find_rf_null(const PseudoField& field, const NullSearchRegion& region) {
  if (!region.box.valid()) throw InvalidInput("null search box has hi < lo");
  const Vec3 c = region.box.center();
  const auto ys = grid_axis(region.box.lo.y(), region.box.hi.y(), region.scan_step);
  const auto n = ys.size();
  if (n < 3) throw NullNotFound("null search line is shorter than three scan steps");

  std::vector<double> psi(n);
#pragma omp parallel for schedule(dynamic, 8)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    psi[static_cast<std::size_t>(i)] = field.psi(Vec3(c.x(), ys[static_cast<std::size_t>(i)], c.z()));
  }

  NullResult out;
  out.scan_points = n;
  out.psi_scale = *std::max_element(psi.begin(), psi.end());
  out.grad_tolerance = 1e-3 * out.psi_scale / 1e-6;

  std::vector<Polished> found;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(psi[i] <= psi[i - 1] && psi[i] <= psi[i + 1])) continue;
    if (psi[i] == psi[i - 1]) continue;  // counted at the start of a plateau
    Polished p = polish_null(field, Vec3(c.x(), ys[i], c.z()), 10.0 * region.scan_step);
    const double tol = region.scan_step;
    const bool inside = p.r.y() >= region.box.lo.y() - tol && p.r.y() <= region.box.hi.y() + tol &&
                        std::abs(p.r.x() - c.x()) <= std::max(region.box.size().x(), 0.0) / 2 + 50.0 * tol;
    if (!inside) continue;
    const bool duplicate = std::any_of(found.begin(), found.end(),
                                       [&](const Polished& q) { return (q.r - p.r).norm() < 0.5 * tol; });
    if (!duplicate) found.push_back(p);
  }
  if (found.empty()) {
    throw NullNotFound(fmt::format("no interior pseudopotential minimum between {} and {}",
                                   um(Vec3(c.x(), ys.front(), c.z())), um(Vec3(c.x(), ys.back(), c.z()))));
  }
  std::sort(found.begin(), found.end(), [](const Polished& a, const Polished& b) { return a.psi < b.psi; });
  for (const auto& p : found) out.candidates.push_back(p.r);

  const double tie = 1e-9 * out.psi_scale;
  if (found.size() > 1 && found[1].psi - found[0].psi <= tie) {
    std::string list;
    for (const auto& p : found) {
      if (p.psi - found[0].psi > tie) break;
      list += fmt::format("{}{} (psi = {:.4g} meV)", list.empty() ? "" : ", ", um(p.r), p.psi / kMilliElectronVolt);
    }
    throw AmbiguousNull("several equal pseudopotential minima: " + list);
  }
  const Polished& best = found.front();
  if (!(best.grad_norm <= out.grad_tolerance)) {
    throw NullNotFound(fmt::format("null polish stalled at {} with |grad psi| = {:.3g} J/m", um(best.r), best.grad_norm));
  }
  out.r_null = best.r;
  out.psi = best.psi;
  out.grad_norm = best.grad_norm;
  out.polish_iterations = best.iterations;
  out.d = best.r.y() - region.reference_height;
  return out;
}

// ---------------------------------------------------------- harmonicity

AxisFit fit_axis(const RfFieldSource& source, const Vec3& center, const Vec3& axis, double r0, double half_width,
                 std::size_t samples, double residual_warning) {
  if (samples < 3) throw FitFailure(fmt::format("quadratic fit needs at least 3 samples, got {}", samples));
  const Vec3 dir = axis.normalized();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(samples));
  for (std::size_t i = 0; i < samples; ++i) {
    const double s = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(samples - 1);
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = 1.0;
    x(r, 1) = s;
    x(r, 2) = s * s;
    y(r) = source.sample(center + s * half_width * dir, false).potential;
  }
  // Columns are in the scaled coordinate s = t / half_width, so a zero
  // window makes the design matrix rank deficient rather than ill-scaled.
  if (!(half_width > 0.0) || !std::isfinite(half_width)) {
    throw FitFailure("quadratic fit window has zero width (degenerate samples)");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < 3) throw FitFailure("quadratic fit design matrix is rank deficient");
  const Eigen::Vector3d coef = qr.solve(y);
  const Eigen::VectorXd resid = y - x * coef;
  const double ssr = resid.squaredNorm();
  const auto dof = static_cast<double>(samples) - 3.0;
  const Eigen::Matrix3d cov = (x.transpose() * x).inverse() * (dof > 0.0 ? ssr / dof : 0.0);

  AxisFit f;
  f.axis = dir;
  f.half_width = half_width;
  f.samples = samples;
  f.curvature = coef(2) / (half_width * half_width);
  f.k = 2.0 * f.curvature * r0 * r0;
  f.k_stderr = 2.0 * std::sqrt(std::max(cov(2, 2), 0.0)) / (half_width * half_width) * r0 * r0;
  f.rms_residual = std::sqrt(ssr / static_cast<double>(samples));
  const double swing = std::abs(coef(2));
  f.relative_residual = swing > 0.0 ? f.rms_residual / swing : (f.rms_residual > 0.0 ? INFINITY : 0.0);
  f.residual_warning = f.relative_residual > residual_warning;
  return f;
}

FitAxis primary_fit_axis(Design design) { return design == Design::CrossRf ? FitAxis::Diagonal : FitAxis::Y; }

const AxisFit& HarmonicityResult::primary_fit() const {
  switch (primary) {
    case FitAxis::X: return x;
    case FitAxis::Diagonal: return diagonal;
    default: return y;
  }
}

HarmonicityResult fit_harmonicity(const PseudoField& field, const NullResult& null, FitAxis primary,
                                  const FitOptions& options) {
  require_positive(null.d, "ion height d");
  require_positive(options.half_width_fraction, "fit window fraction");
  HarmonicityResult h;
  h.primary = primary;
  h.r0 = null.d;
  const double w = options.half_width_fraction * null.d;
  const auto& src = field.source();
  h.x = fit_axis(src, null.r_null, Vec3::UnitX(), h.r0, w, options.samples, options.residual_warning);
  h.y = fit_axis(src, null.r_null, Vec3::UnitY(), h.r0, w, options.samples, options.residual_warning);
  h.diagonal = fit_axis(src, null.r_null, Vec3(1.0, 1.0, 0.0), h.r0, w, options.samples, options.residual_warning);
  return h;
}

// ----------------------------------------------------------- trap depth

EscapeLevel escape_level(std::span<const double> values, std::size_t nx, std::size_t ny, std::size_t nz,
                         std::size_t start) {
  const std::size_t total = nx * ny * nz;
  if (values.size() != total || total == 0) throw InvalidInput("escape_level: grid size mismatch");
  if (start >= total) throw InvalidInput("escape_level: start node outside the grid");

  const std::size_t dims[3] = {nx, ny, nz};
  const std::size_t stride[3] = {1, nx, nx * ny};
  auto coord = [&](std::size_t i, int a) { return (i / stride[a]) % dims[a]; };
  auto on_boundary = [&](std::size_t i) {
    for (int a = 0; a < 3; ++a) {
      if (dims[a] > 1 && (coord(i, a) == 0 || coord(i, a) == dims[a] - 1)) return true;
    }
    return false;
  };

  // Minimax (Prim-style) expansion: always grow the region through its
  // lowest neighbour; the running maximum is the flood level.
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> frontier;
  std::vector<char> seen(total, 0);
  frontier.emplace(values[start], start);
  seen[start] = 1;
  EscapeLevel out;
  out.level = -std::numeric_limits<double>::infinity();
  while (!frontier.empty()) {
    const auto [v, i] = frontier.top();
    frontier.pop();
    if (v > out.level) {
      out.level = v;
      out.bottleneck = i;
    }
    if (on_boundary(i)) {
      out.exit = i;
      // A boundary exit at the flood level means no interior barrier exceeds it.
      if (v >= out.level) out.bottleneck = i;
      out.bottleneck_on_boundary = on_boundary(out.bottleneck);
      return out;
    }
    for (int a = 0; a < 3; ++a) {
      const std::size_t c = coord(i, a);
      if (c > 0 && !seen[i - stride[a]]) {
        seen[i - stride[a]] = 1;
        frontier.emplace(values[i - stride[a]], i - stride[a]);
      }
      if (c + 1 < dims[a] && !seen[i + stride[a]]) {
        seen[i + stride[a]] = 1;
        frontier.emplace(values[i + stride[a]], i + stride[a]);
      }
    }
  }
  // A grid with no boundary (every axis a single node): the start is all there is.
  out.exit = start;
  out.bottleneck = start;
  out.bottleneck_on_boundary = true;
  return out;
}

Box default_depth_box(const TrapGeometry& g, double resolution) {
  Box box = g.fine_region;
  const double z = box.center().z();
  box.lo.z() = z;
  box.hi.z() = z;
  const double bottom = g.bottom_wafer_height();
  const double top = g.top_wafer_height();
  box.lo.y() = std::max(box.lo.y(), bottom + resolution);
  if (top > bottom + 2.0 * resolution) box.hi.y() = std::min(box.hi.y(), top - resolution);
  return box;
}

DepthResult trap_depth(const PseudoField& field, const NullResult& null, const DepthOptions& options) {
  require_positive(options.resolution, "depth grid resolution");
  DepthResult out;
  out.resolution = options.resolution;
  if (options.box) {
    out.box = *options.box;
  } else if (const TrapGeometry* g = field.geometry()) {
    out.box = default_depth_box(*g, options.resolution);
  } else {
    throw InvalidInput("trap_depth needs a search box for a field without geometry");
  }
  if (!out.box.contains(null.r_null, 0.5 * options.resolution)) {
    throw InvalidInput(fmt::format("rf null {} lies outside the depth search box", um(null.r_null)));
  }
  const PseudoGrid grid = pseudo_map(field, out.box, options.resolution);
  out.grid_nodes = grid.psi_meV.size();

  auto nearest = [&](const std::vector<double>& axis, double v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < axis.size(); ++i) {
      if (std::abs(axis[i] - v) < std::abs(axis[best] - v)) best = i;
    }
    return best;
  };
  const std::size_t start =
      grid.index(nearest(grid.x, null.r_null.x()), nearest(grid.y, null.r_null.y()), nearest(grid.z, null.r_null.z()));
  const EscapeLevel esc = escape_level(grid.psi_meV, grid.nx(), grid.ny(), grid.nz(), start);

  auto node_of = [&](std::size_t i) {
    return grid.node(i % grid.nx(), (i / grid.nx()) % grid.ny(), i / (grid.nx() * grid.ny()));
  };
  const double psi_null = null.psi;
  out.saddle = node_of(esc.bottleneck);
  out.saddle_psi = esc.level * kMilliElectronVolt;
  out.zero_depth = esc.bottleneck == start;
  out.boundary_limited = esc.bottleneck_on_boundary && !out.zero_depth;

  if (!out.zero_depth && !out.boundary_limited && options.polish) {
    // Newton on grad psi = 0 over the box's free axes.
    std::vector<int> free;
    for (int a = 0; a < 3; ++a) {
      if (out.box.size()[a] > 0.0) free.push_back(a);
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    Vec3 r = out.saddle;
    bool converged = false;
    for (int it = 0; it < 30 && nf > 0; ++it) {
      const PseudoGradHess gh = field.grad_hess(r);
      Eigen::MatrixXd h(nf, nf);
      Eigen::VectorXd g(nf);
      for (Eigen::Index i = 0; i < nf; ++i) {
        g(i) = gh.grad[free[static_cast<std::size_t>(i)]];
        for (Eigen::Index j = 0; j < nf; ++j) h(i, j) = gh.hess(free[static_cast<std::size_t>(i)], free[static_cast<std::size_t>(j)]);
      }
      Eigen::VectorXd step = -h.fullPivLu().solve(g);
      if (!step.allFinite()) break;
      if (step.norm() > options.resolution) step *= options.resolution / step.norm();
      for (Eigen::Index i = 0; i < nf; ++i) r[free[static_cast<std::size_t>(i)]] += step(i);
      if (step.norm() < 1e-5 * options.resolution) {
        converged = true;
        break;
      }
    }
    if (converged && (r - out.saddle).norm() <= 2.0 * options.resolution) {
      const PseudoGradHess gh = field.grad_hess(r);
      Eigen::MatrixXd h(nf, nf);
      for (Eigen::Index i = 0; i < nf; ++i) {
        for (Eigen::Index j = 0; j < nf; ++j) h(i, j) = gh.hess(free[static_cast<std::size_t>(i)], free[static_cast<std::size_t>(j)]);
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
      out.negative_eigenvalues = static_cast<int>((es.eigenvalues().array() < 0.0).count());
      out.saddle = r;
      out.saddle_psi = gh.psi;
      out.saddle_polished = true;
    }
  }
  out.depth = out.zero_depth ? 0.0 : std::max(out.saddle_psi - psi_null, 0.0);
  const Vec3 dir = out.saddle - null.r_null;
  out.escape_direction = dir.norm() > 0.0 ? Vec3(dir.normalized()) : Vec3::Zero();
  return out;
}

// ---------------------------------------------- frequency and drive formulas

double radial_frequency(double k, double r0, const IonSpecies& s, const DriveParams& drive) {
  require_positive(r0, "r0");
  return drive.voltage * k * s.charge / (std::sqrt(2.0) * s.mass * drive.omega * r0 * r0);
}

double hessian_frequency(double curvature, const IonSpecies& s) {
  return curvature > 0.0 ? std::sqrt(curvature / s.mass) : 0.0;
}

StabilityQ stability_q(double k, double r0, const IonSpecies& s, const DriveParams& drive) {
  require_positive(r0, "r0");
  StabilityQ q;
  q.from_drive = 2.0 * s.charge * drive.voltage * k / (s.mass * drive.omega * drive.omega * r0 * r0);
  q.from_frequency = 2.0 * std::sqrt(2.0) * radial_frequency(k, r0, s, drive) / drive.omega;
  return q;
}

OperatingQ operating_q(double k) {
  require_positive(k, "k");
  OperatingQ q;
  q.q = kSurfaceQ * k / kSurfaceK;
  if (q.q > 1.0) {
    q.q = 1.0;
    q.clamped = true;
  }
  return q;
}

MaxFrequency max_frequency(double k, double r0, const IonSpecies& s, double voltage) {
  require_positive(r0, "r0");
  require_positive(voltage, "rf voltage");
  const OperatingQ q = operating_q(k);
  MaxFrequency m;
  m.q = q.q;
  m.q_clamped = q.clamped;
  m.drive_omega = std::sqrt(2.0 * s.charge * voltage * k / (s.mass * q.q * r0 * r0));
  m.omega_max = q.q * m.drive_omega / (2.0 * std::sqrt(2.0));
  return m;
}

DriveRequirement drive_for_target(double k, double r0, const IonSpecies& s, double omega_target, double q) {
  require_positive(k, "k");
  require_positive(r0, "r0");
  require_positive(omega_target, "target frequency");
  if (!(q > 0.0 && q <= 1.0)) throw InvalidInput(fmt::format("q must lie in (0, 1] (got {})", q));
  DriveRequirement d;
  d.omega = 2.0 * std::sqrt(2.0) * omega_target / q;
  d.voltage = std::sqrt(2.0) * s.mass * d.omega * omega_target * r0 * r0 / (k * s.charge);
  return d;
}

double heating_norm(double omega, double d, double omega_ref, double d_ref) {
  require_positive(omega, "omega");
  require_positive(d, "d");
  require_positive(omega_ref, "reference omega");
  require_positive(d_ref, "reference d");
  const double f = omega_ref / omega;
  const double r = d_ref / d;
  return f * f * (r * r) * (r * r);
}

double power_norm(double voltage, double omega, double voltage_ref, double omega_ref) {
  require_positive(voltage_ref, "reference voltage");
  require_positive(omega_ref, "reference omega");
  const double v = voltage / voltage_ref;
  const double w = omega / omega_ref;
  return v * v * w * w;
}

// --------------------------------------------------------------- report

TrapReport full_report(const SolvedTrap& solved, const IonSpecies& species, const DriveParams& drive,
                       const ReportOptions& options) {
  const TrapGeometry& g = *solved.geometry;
  TrapReport r;
  r.geometry = std::string(to_string(g.design));
  if (g.params && g.design != Design::Surface) r.h = g.params->h;
  r.species = species;
  r.drive = drive;
  r.target_omega = options.target_omega;
  r.solve = solved.diagnostics;
  r.warnings = g.warnings;

  auto skip_all = [&](std::initializer_list<const char*> fields, const std::string& why) {
    for (const char* f : fields) r.not_computed.emplace(f, why);
  };

  if (options.compute_capacitance) {
    const CapacitanceMatrix c = capacitance_matrix(solved);
    r.rf_capacitance = c.rf_capacitance(g);
    if (c.symmetry_defect > 0.01) {
      r.warnings.push_back(fmt::format("capacitance matrix asymmetry {:.2g} exceeds 1%", c.symmetry_defect));
    }
  } else {
    skip_all({"rf_capacitance"}, "disabled");
  }

  const PseudoField field(solved, species, drive);
  NullResult null;
  try {
    null = find_rf_null(field, options.null_region.value_or(default_null_region(g)));
  } catch (const SearchFailure& e) {
    const std::string why = std::string("rf null search failed: ") + e.what();
    skip_all({"d", "k", "depth_meV", "omega_rad", "omega_hessian", "q_drive", "q", "omega_max", "V_rf", "Omega_rf",
              "heating_norm", "power_norm"},
             why);
    return r;
  }
  r.d = null.d;
  r.r_null = null.r_null;

  HarmonicityResult h;
  try {
    h = fit_harmonicity(field, null, primary_fit_axis(g.design), options.fit);
  } catch (const FitFailure& e) {
    skip_all({"k", "omega_rad", "omega_hessian", "q_drive", "q", "omega_max", "V_rf", "Omega_rf", "heating_norm",
              "power_norm"},
             std::string("harmonicity fit failed: ") + e.what());
  }
  if (h.r0 > 0.0) {
    r.k_x = h.x.k;
    r.k_y = h.y.k;
    r.k_diagonal = h.diagonal.k;
    r.k = h.k();
    r.k_stderr = h.k_stderr();
    if (h.residual_warning()) r.warnings.push_back("harmonicity fit residual above threshold");
    if (h.k_stderr() >= 1e-3) r.warnings.push_back(fmt::format("fit standard error {:.2g} >= 0.001", h.k_stderr()));

    const double k = *r.k;
    r.omega_rad = radial_frequency(k, null.d, species, drive);
    r.q_drive = stability_q(k, null.d, species, drive).from_drive;
    const PseudoGradHess gh = field.grad_hess(null.r_null);
    const Vec3 a = h.primary_fit().axis;
    r.omega_hessian = hessian_frequency(a.dot(gh.hess * a), species);
    if (k > 0.0) {
      const OperatingQ q = operating_q(k);
      r.q = q.q;
      r.q_clamped = q.clamped;
      if (q.clamped) r.warnings.push_back("operating q clamped to 1");
      if (drive.voltage > 0.0) r.omega_max = max_frequency(k, null.d, species, drive.voltage).omega_max;
      const DriveRequirement req = drive_for_target(k, null.d, species, options.target_omega, q.q);
      r.V_rf = req.voltage;
      r.Omega_rf = req.omega;
    } else {
      skip_all({"q", "omega_max", "V_rf", "Omega_rf"}, "harmonicity is zero");
    }
  }

  if (options.compute_depth) {
    try {
      const DepthResult dr = trap_depth(field, null, options.depth);
      r.depth_meV = dr.depth_meV();
      r.saddle = dr.saddle;
      r.depth_boundary_limited = dr.boundary_limited;
      if (dr.boundary_limited) r.warnings.push_back("no saddle inside the depth box; depth is a lower bound");
      if (dr.zero_depth) r.warnings.push_back("null region touches the depth box boundary");
      if (!dr.boundary_limited && !dr.zero_depth && !dr.saddle_polished) {
        r.warnings.push_back("saddle polish did not converge; grid saddle reported");
      }
    } catch (const std::exception& e) {
      skip_all({"depth_meV"}, std::string("trap depth failed: ") + e.what());
    }
  } else {
    skip_all({"depth_meV"}, "disabled");
  }

  if (options.reference) {
    normalize_report(r, *options.reference);
  } else {
    skip_all({"heating_norm", "power_norm"}, "no reference report");
  }
  return r;
}

TrapReport full_report(std::shared_ptr<const TrapGeometry> geometry, const IonSpecies& species,
                       const DriveParams& drive, const ReportOptions& options) {
  const SolvedTrap solved = solve_cached(std::move(geometry), options.cache_dir);
  return full_report(solved, species, drive, options);
}

void normalize_report(TrapReport& r, const TrapReport& ref) {
  r.not_computed.erase("heating_norm");
  r.not_computed.erase("power_norm");
  if (r.omega_rad && r.d && ref.omega_rad && ref.d && *r.omega_rad > 0.0 && *ref.omega_rad > 0.0) {
    r.heating_norm = heating_norm(*r.omega_rad, *r.d, *ref.omega_rad, *ref.d);
  } else {
    r.heating_norm.reset();
    r.not_computed.emplace("heating_norm", "frequency or height missing in report or reference");
  }
  if (r.V_rf && r.Omega_rf && ref.V_rf && ref.Omega_rf) {
    r.power_norm = power_norm(*r.V_rf, *r.Omega_rf, *ref.V_rf, *ref.Omega_rf);
  } else {
    r.power_norm.reset();
    r.not_computed.emplace("power_norm", "drive requirement missing in report or reference");
  }
}

namespace {

nlohmann::json opt(const std::optional<double>& v, double scale = 1.0) {
  return v ? nlohmann::json(*v * scale) : nlohmann::json(nullptr);
}

nlohmann::json opt_vec(const std::optional<Vec3>& v) {
  if (!v) return nullptr;
  return {v->x() * 1e6, v->y() * 1e6, v->z() * 1e6};
}

std::string cell(const std::optional<double>& v, double scale, const char* spec) {
  if (!v) return "NA";
  return fmt::format(fmt::runtime(spec), *v * scale);
}

}  // namespace

nlohmann::json report_to_json(const TrapReport& r) {
  constexpr double mhz = 1.0 / (2.0 * kPi * 1e6);
  nlohmann::json j;
  j["geometry"] = r.geometry;
  j["h_um"] = opt(r.h, 1e6);
  j["species"] = {{"label", r.species.label}, {"mass_u", r.species.mass / kAtomicMassUnit}};
  j["drive"] = {{"voltage_V", r.drive.voltage}, {"freq_MHz", r.drive.freq_mhz()}};
  j["target_omega_MHz"] = r.target_omega * mhz;
  j["d_um"] = opt(r.d, 1e6);
  j["r_null_um"] = opt_vec(r.r_null);
  j["k"] = opt(r.k);
  j["k_stderr"] = opt(r.k_stderr);
  j["k_x"] = opt(r.k_x);
  j["k_y"] = opt(r.k_y);
  j["k_diagonal"] = opt(r.k_diagonal);
  j["D_meV"] = opt(r.depth_meV);
  j["saddle_um"] = opt_vec(r.saddle);
  j["depth_boundary_limited"] = r.depth_boundary_limited ? nlohmann::json(*r.depth_boundary_limited) : nullptr;
  j["omega_rad_MHz"] = opt(r.omega_rad, mhz);
  j["omega_hessian_MHz"] = opt(r.omega_hessian, mhz);
  j["q_drive"] = opt(r.q_drive);
  j["q"] = opt(r.q);
  j["q_clamped"] = r.q_clamped ? nlohmann::json(*r.q_clamped) : nullptr;
  j["omega_max_MHz"] = opt(r.omega_max, mhz);
  j["V_rf_kV"] = opt(r.V_rf, 1e-3);
  j["Omega_rf_MHz"] = opt(r.Omega_rf, mhz);
  j["heating_norm"] = opt(r.heating_norm);
  j["power_norm"] = opt(r.power_norm);
  j["rf_capacitance_fF"] = opt(r.rf_capacitance, 1e15);
  j["not_computed"] = r.not_computed;
  j["warnings"] = r.warnings;
  j["solve"] = {{"panels", r.solve.panel_count},
                {"condition_estimate", r.solve.condition_estimate},
                {"max_residual_V", r.solve.max_residual},
                {"from_cache", r.solve.from_cache}};
  return j;
}

std::string report_csv_header() { return "geometry,d_um,k,q,omega_MHz,V_kV,Omega_MHz,P_norm"; }

std::string report_csv_row(const TrapReport& r) {
  constexpr double mhz = 1.0 / (2.0 * kPi * 1e6);
  return fmt::format("{},{},{},{},{},{},{},{}", r.geometry, cell(r.d, 1e6, "{:.3f}"), cell(r.k, 1.0, "{:.4f}"),
                     cell(r.q, 1.0, "{:.4f}"), cell(r.target_omega, mhz, "{:.4f}"), cell(r.V_rf, 1e-3, "{:.5f}"),
                     cell(r.Omega_rf, mhz, "{:.4f}"), cell(r.power_norm, 1.0, "{:.4e}"));
}

}  // namespace iontrap
