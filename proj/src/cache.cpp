#include "iontrap/cache.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>
#include <system_error>

#include <fmt/core.h>

#include "iontrap/constants.hpp"

namespace iontrap {
namespace {

constexpr char kMagic[8] = {'I', 'T', 'B', 'E', 'M', 'S', 'O', 'L'};

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void f64(double v) {
    const auto le = to_little(std::bit_cast<std::uint64_t>(v));
    bytes(&le, sizeof le);
  }
  void u64(std::uint64_t v) {
    const auto le = to_little(v);
    bytes(&le, sizeof le);
  }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  template <typename T>
  void put(T v) {
    const T le = to_little(v);
    raw(&le, sizeof le);
  }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  explicit Reader(std::ifstream& in) : in_(in) {}
  bool raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in_.gcount()) == n;
  }
  template <typename T>
  bool get(T& v) {
    T le{};
    if (!raw(&le, sizeof le)) return false;
    v = to_little(le);
    return true;
  }
  bool f64(double& v) {
    std::uint64_t bits = 0;
    if (!get(bits)) return false;
    v = std::bit_cast<double>(bits);
    return true;
  }

 private:
  std::ifstream& in_;
};

}  // namespace

std::uint64_t cache_key(const TrapGeometry& geometry) {
  Fnv1a h;
  h.u64(kCacheVersion);
  h.f64(kernel_permittivity());
  h.u64(geometry.electrodes.size());
  for (const auto& e : geometry.electrodes) {
    h.str(e.name);
    h.u64(static_cast<std::uint64_t>(e.role));
    h.u64(e.panel_begin);
    h.u64(e.panel_end);
  }
  h.u64(geometry.panels.size());
  for (const auto& p : geometry.panels) {
    for (const Vec3* v : {&p.rect.origin, &p.rect.edge_u, &p.rect.edge_v}) {
      for (int k = 0; k < 3; ++k) h.f64((*v)[k]);
    }
  }
  return h.value();
}

std::filesystem::path cache_file(const std::filesystem::path& dir, std::uint64_t key) {
  return dir / fmt::format("bem-{:016x}.bin", key);
}

std::optional<SolvedTrap> load_solution(const std::filesystem::path& file,
                                        std::shared_ptr<const TrapGeometry> geometry) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return std::nullopt;
  Reader r(in);
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t key = 0, n = 0, m = 0;
  SolvedTrap out;
  if (!r.raw(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) return std::nullopt;
  if (!r.get(version) || version != kCacheVersion) return std::nullopt;
  if (!r.get(key) || key != cache_key(*geometry)) return std::nullopt;
  if (!r.get(n) || n != geometry->panels.size()) return std::nullopt;
  if (!r.get(m) || m != geometry->electrodes.size()) return std::nullopt;
  if (!r.f64(out.diagnostics.condition_estimate) || !r.f64(out.diagnostics.max_residual)) return std::nullopt;
  for (std::uint64_t e = 0; e < m; ++e) {
    UnitSolution u;
    std::uint64_t len = 0;
    if (!r.get(len) || len > 4096) return std::nullopt;
    u.electrode.resize(len);
    if (!r.raw(u.electrode.data(), len) || u.electrode != geometry->electrodes[e].name) return std::nullopt;
    if (!r.f64(u.residual_norm)) return std::nullopt;
    u.electrode_index = e;
    u.panel_count = n;
    u.charge_density.resize(n);
    for (auto& s : u.charge_density) {
      if (!r.f64(s)) return std::nullopt;
    }
    out.units.push_back(std::move(u));
  }
  out.geometry = std::move(geometry);
  out.diagnostics.panel_count = n;
  out.diagnostics.from_cache = true;
  return out;
}

void store_solution(const std::filesystem::path& file, const SolvedTrap& solved) {
  // Write to a temporary name and rename so readers never see a partial file.
  const auto tmp = std::filesystem::path(file.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) return;
    Writer w(out);
    w.raw(kMagic, sizeof kMagic);
    w.put(kCacheVersion);
    w.put(cache_key(*solved.geometry));
    w.put(static_cast<std::uint64_t>(solved.geometry->panels.size()));
    w.put(static_cast<std::uint64_t>(solved.units.size()));
    w.f64(solved.diagnostics.condition_estimate);
    w.f64(solved.diagnostics.max_residual);
    for (const auto& u : solved.units) {
      w.put(static_cast<std::uint64_t>(u.electrode.size()));
      w.raw(u.electrode.data(), u.electrode.size());
      w.f64(u.residual_norm);
      for (double s : u.charge_density) w.f64(s);
    }
    if (!out) return;
  }
  std::error_code ec;
  std::filesystem::rename(tmp, file, ec);
  if (ec) std::filesystem::remove(tmp, ec);
}

std::optional<std::filesystem::path> cache_dir_from_env() {
  const char* dir = std::getenv("IONTRAP_CACHE_DIR");
  if (dir == nullptr || *dir == '\0') return std::nullopt;
  return std::filesystem::path(dir);
}

SolvedTrap solve_cached(std::shared_ptr<const TrapGeometry> geometry,
                        const std::optional<std::filesystem::path>& dir, const SolveOptions& options) {
  if (!dir) return solve_unit_excitations(std::move(geometry), options);
  const auto file = cache_file(*dir, cache_key(*geometry));
  if (auto hit = load_solution(file, geometry)) return std::move(*hit);
  SolvedTrap solved = solve_unit_excitations(std::move(geometry), options);
  std::error_code ec;
  std::filesystem::create_directories(*dir, ec);
  if (!ec) store_solution(file, solved);
  return solved;
}

}  // namespace iontrap
