#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>

#include "iontrap/solver.hpp"

namespace iontrap {

// On-disk cache of unit solutions. File layout, all little-endian:
//   char[8]  magic "ITBEMSOL"
//   u32      format version (kCacheVersion)
//   u64      geometry key (cache_key)
//   u64      panel count N
//   u64      electrode count M
//   f64      condition estimate
//   f64      max residual (V)
//   M times: u64 name length, name bytes, f64 residual, N x f64 density (C/m^2)
inline constexpr std::uint32_t kCacheVersion = 1;

/// FNV-1a hash over the panel rectangles, electrode names/roles and the
/// kernel permittivity. Equal keys mean the collocation problem is identical.
std::uint64_t cache_key(const TrapGeometry& geometry);

std::filesystem::path cache_file(const std::filesystem::path& dir, std::uint64_t key);

/// Returns nothing when the file is missing, truncated, from another
/// format version, or belongs to a different geometry.
std::optional<SolvedTrap> load_solution(const std::filesystem::path& file,
                                        std::shared_ptr<const TrapGeometry> geometry);
void store_solution(const std::filesystem::path& file, const SolvedTrap& solved);

/// Cache directory from IONTRAP_CACHE_DIR, if set and nonempty.
std::optional<std::filesystem::path> cache_dir_from_env();

/// solve_unit_excitations with a lookup in `dir` (if given) before solving
/// and a store after. Cache I/O failures never fail the solve.
SolvedTrap solve_cached(std::shared_ptr<const TrapGeometry> geometry,
                        const std::optional<std::filesystem::path>& dir, const SolveOptions& options = {});

}  // namespace iontrap
