#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace edgestereo {

// All recoverable failures (shape mismatches, bad configs, malformed files)
// surface as Error.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

inline const char* dtype_name(DType dt) { return dt == DType::F32 ? "f32" : "f64"; }

// Calls f.operator()<T>() with T = float or double.
template <class F>
decltype(auto) dispatch(DType dt, F&& f) {
  if (dt == DType::F32) return f.template operator()<float>();
  return f.template operator()<double>();
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives an independent seed from a base seed and a stream id. Used for
// per-sample / per-epoch RNG so data order is a pure function of the config
// seed (required for bitwise-reproducible resume).
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream + 0x632be59bd9b4e019ull));
}

// Deterministic RNG. uniform() maps raw 64-bit draws to [0,1) directly so
// sequences do not depend on the standard library's distribution
// implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : base_(seed), eng_(splitmix64(seed)) {}

  std::uint64_t next() { return eng_(); }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive range.
  int uniform_int(int lo, int hi) {
    check(hi >= lo, "Rng::uniform_int: empty range");
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next() % span);
  }

  Rng fork(std::uint64_t stream) const { return Rng(mix_seed(base_, stream)); }

  std::uint64_t base_seed() const { return base_; }

 private:
  std::uint64_t base_;
  std::mt19937_64 eng_;
};

// Number of worker threads operator kernels may use. Reads EDGESTEREO_THREADS
// once; defaults to the hardware count. Kernels that parallelize write
// disjoint output ranges, so results are identical for any thread count.
int worker_threads();

// Runs fn(i) for i in [0, n). Splits contiguous ranges across threads when
// worker_threads() > 1 and the range is large enough to be worth it.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

}  // namespace edgestereo
