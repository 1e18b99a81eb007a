#pragma once

#include <iosfwd>
#include <string>

#include "seqht/solver.hpp"

namespace seqht {

/// Policy file layout (little-endian):
///   "SEQHTPOL", u32 version, u64 n, n bytes of JSON metadata,
///   model block, stage blocks, u64 FNV-1a checksum of all preceding bytes.
/// The metadata carries the solver config, model digest and an opaque
/// caller-supplied problem description. Doubles are stored raw, so a round
/// trip is bit-exact.
inline constexpr std::uint32_t kPolicyFormatVersion = 1;

struct PolicyFile {
  PolicyTable table;
  std::string problem;  // as passed to write_policy
};

void write_policy(std::ostream& out, const PolicyTable& pt, const std::string& problem = "");
void write_policy(const std::string& path, const PolicyTable& pt, const std::string& problem = "");

/// Throws PolicyFormat on a bad magic, unknown version, checksum mismatch or
/// truncated file.
PolicyFile read_policy(std::istream& in);
PolicyFile read_policy(const std::string& path);

}  // namespace seqht
