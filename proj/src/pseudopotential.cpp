#include "iontrap/pseudopotential.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/core.h>
#include <fmt/ostream.h>

#include "iontrap/errors.hpp"

namespace iontrap {

namespace {

struct SpeciesEntry {
  const char* label;
  double mass_u;
};

// Atomic masses (u) of singly charged ions commonly trapped.
constexpr SpeciesEntry kSpecies[] = {
    {"Ca40", 39.9625909},  {"Ca43", 42.9587666},   {"Be9", 9.0121831},    {"Mg24", 23.9850417},
    {"Mg25", 24.9858370},  {"Sr88", 87.9056122},   {"Ba137", 136.9058271}, {"Ba138", 137.9052470},
    {"Yb171", 170.9363258}, {"Yb174", 173.9388621},
};

std::string normalize_label(std::string_view name) {
  // Accept "Ca40", "40Ca", "40Ca+", "ca-40", case-insensitively.
  std::string letters, digits;
  for (char c : name) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalpha(u)) letters += static_cast<char>(std::tolower(u));
    else if (std::isdigit(u)) digits += c;
  }
  return letters + digits;
}

// Off the sheet, or the larger of the two one-sided values on it.
template <typename F>
auto off_sheet(const RfFieldSource& source, const Vec3& point, bool with_jacobian, F&& use) {
  const FieldSample s = source.sample(point, with_jacobian);
  if (!s.on_sheet) return use(s);
  const Vec3 n = s.sheet_normal * 1e-9;
  const auto a = use(source.sample(point + n, with_jacobian));
  const auto b = use(source.sample(point - n, with_jacobian));
  return std::max(a, b);
}

}  // namespace

IonSpecies IonSpecies::calcium40() { return species_by_name("Ca40"); }

IonSpecies species_by_name(std::string_view name) {
  const std::string key = normalize_label(name);
  for (const auto& e : kSpecies) {
    if (normalize_label(e.label) == key) return IonSpecies{e.label, kElementaryCharge, e.mass_u * kAtomicMassUnit};
  }
  std::string known;
  for (const auto& e : kSpecies) known += fmt::format("{}{}", known.empty() ? "" : ", ", e.label);
  throw InvalidInput(fmt::format("unknown ion species '{}' (known: {})", name, known));
}

std::vector<std::string> species_names() {
  std::vector<std::string> out;
  for (const auto& e : kSpecies) out.emplace_back(e.label);
  return out;
}

DriveParams DriveParams::from_mhz(double voltage, double freq_mhz) {
  DriveParams d;
  d.voltage = voltage;
  d.omega = 2.0 * kPi * freq_mhz * 1e6;
  return d;
}

void validate(const IonSpecies& s) {
  if (!(s.charge > 0.0) || !(s.mass > 0.0)) {
    throw InvalidInput(fmt::format("species '{}' needs positive charge and mass", s.label));
  }
}

void validate(const DriveParams& d) {
  if (!(d.voltage >= 0.0) || !std::isfinite(d.voltage)) throw InvalidInput("rf voltage must be non-negative");
  if (!(d.omega > 0.0) || !std::isfinite(d.omega)) throw InvalidInput("rf frequency must be positive");
}

BemRfSource::BemRfSource(const SolvedTrap& solved) : evaluator_(solved, solved.rf_unit_voltages()) {}

FieldSample BemRfSource::sample(const Vec3& point, bool with_jacobian) const {
  return evaluator_.sample(point, with_jacobian);
}

QuadrupoleSource::QuadrupoleSource(double k, double r0, Vec3 center, double b4)
    : c_(k / (2.0 * r0 * r0)), center_(std::move(center)), b4_(b4) {}

FieldSample QuadrupoleSource::sample(const Vec3& point, bool with_jacobian) const {
  const Vec3 d = point - center_;
  FieldSample s;
  s.point = point;
  s.potential = c_ * (d.x() * d.x() - d.y() * d.y()) + b4_ * std::pow(d.y(), 4);
  s.field = Vec3(-2.0 * c_ * d.x(), 2.0 * c_ * d.y() - 4.0 * b4_ * std::pow(d.y(), 3), 0.0);
  if (with_jacobian) {
    s.jacobian = Mat3::Zero();
    s.jacobian(0, 0) = -2.0 * c_;
    s.jacobian(1, 1) = 2.0 * c_ - 12.0 * b4_ * d.y() * d.y();
  }
  return s;
}

PseudoField::PseudoField(std::shared_ptr<const RfFieldSource> source, IonSpecies species, DriveParams drive)
    : source_(std::move(source)), species_(std::move(species)), drive_(drive) {
  validate(species_);
  validate(drive_);
  alpha_ = species_.charge * species_.charge / (4.0 * species_.mass * drive_.omega * drive_.omega);
}

PseudoField::PseudoField(const SolvedTrap& solved, IonSpecies species, DriveParams drive)
    : PseudoField(std::make_shared<BemRfSource>(solved), std::move(species), drive) {}

Vec3 PseudoField::field(const Vec3& point) const { return drive_.voltage * source_->sample(point, false).field; }

double PseudoField::unit_potential(const Vec3& point) const { return source_->sample(point, false).potential; }

double PseudoField::psi(const Vec3& point) const {
  const double v2 = drive_.voltage * drive_.voltage;
  return off_sheet(*source_, point, false, [&](const FieldSample& s) { return alpha_ * v2 * s.field.squaredNorm(); });
}

PseudoGradHess PseudoField::grad_hess(const Vec3& point, double step) const {
  PseudoGradHess out;
  const double floor_step = 64.0 * std::numeric_limits<double>::epsilon() * std::max(point.cwiseAbs().maxCoeff(), 1e-6);
  if (!(step >= floor_step)) {
    out.warnings.push_back(fmt::format("differencing step {:.3g} m underflows at this point; widened to {:.3g} m",
                                       step, floor_step));
    step = floor_step;
  }
  out.step = step;
  const double v = drive_.voltage;
  const double a2 = 2.0 * alpha_ * v * v;
  const FieldSample s = source_->sample(point, true);
  if (s.on_sheet) out.warnings.push_back("point lies on an electrode sheet; normal derivatives are one-sided");
  const Vec3& e = s.field;
  const Mat3& j = s.jacobian;  // j(i, k) = dE_i/dx_k
  out.psi = alpha_ * v * v * e.squaredNorm();
  out.grad = a2 * j.transpose() * e;

  // Second derivatives of E by central differences of the analytic Jacobian.
  Mat3 second = Mat3::Zero();  // second(j, k) = sum_i E_i d2E_i/dx_j dx_k
  bool crossed = false;
  for (int k = 0; k < 3; ++k) {
    Vec3 dp = Vec3::Zero();
    dp[k] = step;
    const FieldSample plus = source_->sample(point + dp, true);
    const FieldSample minus = source_->sample(point - dp, true);
    crossed |= plus.on_sheet || minus.on_sheet;
    const Mat3 dj = (plus.jacobian - minus.jacobian) / (2.0 * step);  // dJ/dx_k
    second.col(k) = dj.transpose() * e;
  }
  if (crossed) out.warnings.push_back("differencing stencil touches an electrode sheet");
  const Mat3 h = a2 * (j.transpose() * j + second);
  out.hess = 0.5 * (h + h.transpose());
  return out;
}

Box simulation_volume(const TrapGeometry& geometry) {
  Box b = geometry.bounds();
  if (geometry.params) {
    const double half = 0.5 * geometry.params->wafer_extent;
    b.lo.x() = std::min(b.lo.x(), -half);
    b.hi.x() = std::max(b.hi.x(), half);
    b.lo.z() = std::min(b.lo.z(), -0.5 * geometry.params->electrode_length);
    b.hi.z() = std::max(b.hi.z(), 0.5 * geometry.params->electrode_length);
  }
  const double bottom = geometry.bottom_wafer_height();
  b.lo.y() = bottom;
  b.hi.y() = std::max(geometry.top_wafer_height(), bottom + 5e-3);
  return b;
}

std::vector<double> grid_axis(double lo, double hi, double resolution) {
  if (!(resolution > 0.0) || !std::isfinite(resolution)) {
    throw InvalidInput(fmt::format("grid resolution must be positive (got {} m)", resolution));
  }
  if (!(hi >= lo)) throw InvalidInput("grid box has hi < lo");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / resolution + 1e-3));
  std::vector<double> axis(n + 1);
  for (std::size_t i = 0; i <= n; ++i) axis[i] = lo + static_cast<double>(i) * resolution;
  return axis;
}

PseudoGrid pseudo_map(const PseudoField& field, const Box& box, double resolution) {
  if (!box.valid()) throw InvalidInput("pseudopotential map box has hi < lo");
  if (const TrapGeometry* g = field.geometry()) {
    const Box volume = simulation_volume(*g);
    if (!volume.contains(box.lo, 1e-9) || !volume.contains(box.hi, 1e-9)) {
      throw InvalidInput("pseudopotential map box lies outside the simulation volume");
    }
  }
  PseudoGrid grid;
  grid.x = grid_axis(box.lo.x(), box.hi.x(), resolution);
  grid.y = grid_axis(box.lo.y(), box.hi.y(), resolution);
  grid.z = grid_axis(box.lo.z(), box.hi.z(), resolution);
  const std::size_t total = grid.nx() * grid.ny() * grid.nz();
  grid.psi_meV.assign(total, 0.0);
  const auto n = static_cast<long long>(total);
#pragma omp parallel for schedule(dynamic, 8)
  for (long long idx = 0; idx < n; ++idx) {
    const auto i = static_cast<std::size_t>(idx);
    const std::size_t ix = i % grid.nx();
    const std::size_t iy = (i / grid.nx()) % grid.ny();
    const std::size_t iz = i / (grid.nx() * grid.ny());
    grid.psi_meV[i] = field.psi_meV(grid.node(ix, iy, iz));
  }
  return grid;
}

void write_grid_csv(const PseudoGrid& grid, std::ostream& out) {
  out << "x_um,y_um,z_um,psi_meV\n";
  for (std::size_t iz = 0; iz < grid.nz(); ++iz) {
    for (std::size_t iy = 0; iy < grid.ny(); ++iy) {
      for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
        fmt::print(out, "{:.6f},{:.6f},{:.6f},{:.9g}\n", grid.x[ix] * 1e6, grid.y[iy] * 1e6, grid.z[iz] * 1e6,
                   grid.psi_meV[grid.index(ix, iy, iz)]);
      }
    }
  }
}

nlohmann::json grid_header(const PseudoGrid& grid, const PseudoField& field, const Box& box, double resolution) {
  nlohmann::json j;
  j["columns"] = {"x_um", "y_um", "z_um", "psi_meV"};
  j["order"] = "x fastest, then y, then z";
  j["shape"] = {grid.nx(), grid.ny(), grid.nz()};
  j["box_um"] = {{"lo", {box.lo.x() * 1e6, box.lo.y() * 1e6, box.lo.z() * 1e6}},
                 {"hi", {box.hi.x() * 1e6, box.hi.y() * 1e6, box.hi.z() * 1e6}}};
  j["resolution_um"] = resolution * 1e6;
  j["species"] = {{"label", field.species().label},
                  {"charge_C", field.species().charge},
                  {"mass_kg", field.species().mass}};
  j["drive"] = {{"voltage_V", field.drive().voltage}, {"freq_MHz", field.drive().freq_mhz()}};
  return j;
}

}  // namespace iontrap
