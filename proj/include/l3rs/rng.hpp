#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace l3rs {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-sensitive hash of a tuple of integers. Used to derive independent
// RNG streams such as (seed, generation, candidate, task).
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

// Stream tags keep derived seeds for different purposes apart.
enum class Stream : std::uint64_t {
  Init = 1,
  Task = 2,
  Perturbation = 3,
  HeadInit = 4,
  Batches = 5,
  Evaluation = 6,
  Pretrain = 7,
  Generator = 8,
};

inline std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

inline void fill_normal(Rng& rng, std::span<double> out, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& x : out) x = dist(rng);
}

}  // namespace l3rs
