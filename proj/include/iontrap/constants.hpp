#pragma once

#include <numbers>

namespace iontrap {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m
inline constexpr double kElementaryCharge = 1.602176634e-19;     // C
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;     // kg

inline constexpr double kMicron = 1e-6;
inline constexpr double kMegahertz = 1e6;
inline constexpr double kMilliElectronVolt = 1e-3 * kElementaryCharge;  // J

/// Value of the vacuum permittivity used by the BEM kernels. Equal to
/// kVacuumPermittivity unless a test has installed a perturbation.
double kernel_permittivity();

namespace testing {

/// Scales the permittivity seen by the kernels for the lifetime of the
/// object. Only meant for fault-injection checks.
class ScopedPermittivityScale {
 public:
  explicit ScopedPermittivityScale(double scale);
  ~ScopedPermittivityScale();
  ScopedPermittivityScale(const ScopedPermittivityScale&) = delete;
  ScopedPermittivityScale& operator=(const ScopedPermittivityScale&) = delete;

 private:
  double previous_;
};

}  // namespace testing
}  // namespace iontrap
