#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace opl {

using Engine = std::mt19937_64;

/// Purpose tags that keep substreams of one master seed disjoint.
enum class Stream : std::uint64_t {
  CleanRows = 1,
  Contamination = 2,
  MonteCarlo = 3,
  ElementalStarts = 4,
  Bootstrap = 5,
  Replication = 6,
  Directions = 7,
  NumericSample = 8,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for the substream addressed by (master, tag, i, j). Pure function of
/// its arguments, so any work item can rebuild its generator independently of
/// the order in which items are scheduled.
std::uint64_t substream_seed(std::uint64_t master, Stream tag, std::uint64_t i,
                             std::uint64_t j = 0);

inline Engine substream(std::uint64_t master, Stream tag, std::uint64_t i, std::uint64_t j = 0) {
  return Engine(substream_seed(master, tag, i, j));
}

/// Draws k distinct indices from [0, n) (partial Fisher-Yates).
std::vector<int> sample_without_replacement(int n, int k, Engine& eng);

}  // namespace opl
