#include "iontrap/constants.hpp"

#include <atomic>

namespace iontrap {

namespace {
std::atomic<double> g_permittivity_scale{1.0};
}

double kernel_permittivity() { return kVacuumPermittivity * g_permittivity_scale.load(std::memory_order_relaxed); }

namespace testing {

ScopedPermittivityScale::ScopedPermittivityScale(double scale) : previous_(g_permittivity_scale.exchange(scale)) {}

ScopedPermittivityScale::~ScopedPermittivityScale() { g_permittivity_scale.store(previous_); }

}  // namespace testing
}  // namespace iontrap
