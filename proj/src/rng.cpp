#include "opl/rng.hpp"

#include <numeric>
#include <stdexcept>
#include <vector>

namespace opl {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t master, Stream tag, std::uint64_t i, std::uint64_t j) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  h = splitmix64(h ^ i);
  h = splitmix64(h ^ (j * 0xd6e8feb86659fd93ULL));
  return h;
}

std::vector<int> sample_without_replacement(int n, int k, Engine& eng) {
  if (k < 0 || k > n) throw std::invalid_argument("sample_without_replacement: k out of range");
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(eng))]);
  }
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

}  // namespace opl
