// Versioned binary container of named float32 arrays, shared by checkpoints
// and feature blobs. Layout: magic "SCAMA1", then records of
// (u32 name length, name bytes, u32 rank, u64 extents, f32 data,
// little-endian), a zero name-length sentinel, and an FNV-1a checksum
// trailer over everything after the magic.

#ifndef SCAMA_CHECKPOINT_H_
#define SCAMA_CHECKPOINT_H_

#include <string>
#include <vector>

#include "scama/model.h"

namespace scama {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ArrayRecord {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

void write_array_file(const std::string& path,
                      const std::vector<ArrayRecord>& records);
std::vector<ArrayRecord> read_array_file(const std::string& path);

void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace scama

#endif  // SCAMA_CHECKPOINT_H_
