#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace visrank::digest {

// FNV-1a, used for fixture keys and mock determinism. Not cryptographic.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull);

// splitmix64 finalizer; decorrelates nearby hash inputs.
std::uint64_t mix(std::uint64_t x);

// Maps a hash to (0, 1): 53 mantissa bits, never exactly 0 or 1.
double unit_interval(std::uint64_t h);

std::string hex(std::uint64_t h);

}  // namespace visrank::digest
