// Copyright 2026 The Trajplan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TRAJPLAN_NUMERICS_CHECKPOINT_H_
#define TRAJPLAN_NUMERICS_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "trajplan/numerics/tensor.h"

namespace trajplan {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

enum class StorageType { kFloat64, kFloat32 };

// On disk a checkpoint is a directory holding `manifest.json` and one
// little-endian flat binary blob per tensor:
//
//   {
//     "format": "trajplan-checkpoint", "version": 1, "seed": 7,
//     "tensors": [{"name": "...", "shape": [..], "dtype": "f64",
//                  "file": "tensor_000.bin", "fnv1a64": "..."}],
//     "metadata": {...}
//   }
struct Checkpoint {
  NamedTensors tensors;
  uint64_t seed = 0;
  nlohmann::json metadata = nlohmann::json::object();
};

void SaveCheckpoint(const std::filesystem::path& dir,
                    const Checkpoint& checkpoint,
                    StorageType storage = StorageType::kFloat64);

// Verifies blob sizes and checksums; throws std::runtime_error on mismatch.
Checkpoint LoadCheckpoint(const std::filesystem::path& dir);

// 64-bit FNV-1a; used for artifact checksums.
uint64_t Fnv1a64(std::span<const char> bytes, uint64_t seed = 0xcbf29ce484222325ULL);
std::string Fnv1a64Hex(std::span<const char> bytes);
std::string FileChecksum(const std::filesystem::path& file);

void WriteLittleEndianF64(const std::filesystem::path& file,
                          std::span<const double> values);
void WriteLittleEndianF32(const std::filesystem::path& file,
                          std::span<const double> values);
std::vector<double> ReadLittleEndianF64(const std::filesystem::path& file);
std::vector<double> ReadLittleEndianF32(const std::filesystem::path& file);

}  // namespace trajplan

#endif  // TRAJPLAN_NUMERICS_CHECKPOINT_H_
