#pragma once

#include <string>

#include "lmhd/field.hpp"

namespace lmhd {

// Binary field snapshot.
//
// 32-byte header:
//   bytes  0-3   magic "LMHD"
//   bytes  4-7   version (u32, little-endian), currently 1
//   bytes  8-11  grid N (u32)
//   bytes 12-15  component count (u32): 1 scalar, 3 vector, 9 tensor
//   byte  16     flavor (u8): 0 general/scalar/vector, 1 symmetric_traceless,
//                2 skew_symmetric
//   bytes 17-31  zero padding
// followed by component-count * N^3 complex coefficients as little-endian
// f64 pairs (re, im), components outermost, then row-major xi order
// (ix, iy, iz; iz fastest) in FFT index convention.

void write_snapshot(const std::string& path, const VectorField& f);
void write_snapshot(const std::string& path, const TensorField& f);
void write_snapshot(const std::string& path, const ScalarField& f);

VectorField read_snapshot_vector(const std::string& path);
TensorField read_snapshot_tensor(const std::string& path);
ScalarField read_snapshot_scalar(const std::string& path);

// Writes content to path atomically (temp file in the same directory, then
// rename).
void atomic_write_text(const std::string& path, const std::string& content);

// Artifact stamp carried by every CSV/JSON the toolkit emits.
struct ArtifactStamp {
  uint64_t ledger_hash = 0;
  bool paper_faithful = true;
  std::string csv_comment() const;  // "# ledger_hash=... paper_faithful=..."
};

void ensure_dir(const std::string& path);

}  // namespace lmhd
