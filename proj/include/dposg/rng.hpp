#pragma once

#include <cstdint>
#include <random>

namespace dposg {

using Rng = std::mt19937_64;

// Stream-split convention: every consumer of randomness owns an engine seeded
// from (master_seed, stream_id). Worker i uses stream_id = i, so worker 0 draws
// the same noise sequence whatever the number of workers. Shared topology
// sampling and assumption probing use reserved ids far above any worker id.
namespace streams {
inline constexpr std::uint64_t kTopology = 0x7f00'0000'0000'0001ULL;
inline constexpr std::uint64_t kValidation = 0x7f00'0000'0000'0002ULL;
}  // namespace streams

inline Rng make_stream(std::uint64_t master_seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32)};
  return Rng(seq);
}

inline Rng worker_stream(std::uint64_t master_seed, int worker_id) {
  return make_stream(master_seed, static_cast<std::uint64_t>(worker_id));
}

}  // namespace dposg
