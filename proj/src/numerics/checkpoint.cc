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

#include "trajplan/numerics/checkpoint.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

namespace trajplan {
namespace {

namespace fs = std::filesystem;

template <typename T>
T ToLittle(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (size_t i = 0; i < sizeof(T) / 2; ++i) {
      std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }
}

std::string ReadBytes(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void WriteBytes(const fs::path& file, const std::string& bytes) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

template <typename T>
std::string Encode(std::span<const double> values) {
  std::string bytes(values.size() * sizeof(T), '\0');
  for (size_t i = 0; i < values.size(); ++i) {
    T v = ToLittle(static_cast<T>(values[i]));
    std::memcpy(bytes.data() + i * sizeof(T), &v, sizeof(T));
  }
  return bytes;
}

template <typename T>
std::vector<double> Decode(const std::string& bytes, const fs::path& file) {
  if (bytes.size() % sizeof(T) != 0) {
    throw std::runtime_error(file.string() + ": size " +
                             std::to_string(bytes.size()) +
                             " is not a multiple of " +
                             std::to_string(sizeof(T)));
  }
  std::vector<double> values(bytes.size() / sizeof(T));
  for (size_t i = 0; i < values.size(); ++i) {
    T v;
    std::memcpy(&v, bytes.data() + i * sizeof(T), sizeof(T));
    values[i] = static_cast<double>(ToLittle(v));
  }
  return values;
}

}  // namespace

uint64_t Fnv1a64(std::span<const char> bytes, uint64_t seed) {
  uint64_t h = seed;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Fnv1a64Hex(std::span<const char> bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(Fnv1a64(bytes)));
  return buf;
}

std::string FileChecksum(const fs::path& file) {
  const std::string bytes = ReadBytes(file);
  return Fnv1a64Hex(bytes);
}

void WriteLittleEndianF64(const fs::path& file,
                          std::span<const double> values) {
  WriteBytes(file, Encode<double>(values));
}

void WriteLittleEndianF32(const fs::path& file,
                          std::span<const double> values) {
  WriteBytes(file, Encode<float>(values));
}

std::vector<double> ReadLittleEndianF64(const fs::path& file) {
  return Decode<double>(ReadBytes(file), file);
}

std::vector<double> ReadLittleEndianF32(const fs::path& file) {
  return Decode<float>(ReadBytes(file), file);
}

void SaveCheckpoint(const fs::path& dir, const Checkpoint& checkpoint,
                    StorageType storage) {
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "trajplan-checkpoint";
  manifest["version"] = 1;
  manifest["seed"] = checkpoint.seed;
  manifest["tensors"] = nlohmann::json::array();
  for (size_t i = 0; i < checkpoint.tensors.size(); ++i) {
    const auto& [name, tensor] = checkpoint.tensors[i];
    char file[32];
    std::snprintf(file, sizeof(file), "tensor_%03zu.bin", i);
    const std::string bytes = storage == StorageType::kFloat64
                                  ? Encode<double>(tensor.data())
                                  : Encode<float>(tensor.data());
    WriteBytes(dir / file, bytes);
    manifest["tensors"].push_back(
        {{"name", name},
         {"shape", tensor.shape()},
         {"dtype", storage == StorageType::kFloat64 ? "f64" : "f32"},
         {"file", file},
         {"fnv1a64", Fnv1a64Hex(bytes)}});
  }
  manifest["metadata"] = checkpoint.metadata;
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

Checkpoint LoadCheckpoint(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw std::runtime_error("missing checkpoint manifest " +
                             manifest_path.string());
  }
  const nlohmann::json manifest = nlohmann::json::parse(ReadBytes(manifest_path));
  if (manifest.value("format", "") != "trajplan-checkpoint") {
    throw std::runtime_error(manifest_path.string() +
                             " is not a trajplan checkpoint manifest");
  }
  Checkpoint checkpoint;
  checkpoint.seed = manifest.value("seed", uint64_t{0});
  checkpoint.metadata = manifest.value("metadata", nlohmann::json::object());
  for (const auto& entry : manifest.at("tensors")) {
    const std::string name = entry.at("name");
    const fs::path file = dir / entry.at("file").get<std::string>();
    const std::string bytes = ReadBytes(file);
    if (entry.contains("fnv1a64") &&
        entry.at("fnv1a64").get<std::string>() != Fnv1a64Hex(bytes)) {
      throw std::runtime_error("checksum mismatch for tensor '" + name +
                               "' in " + file.string());
    }
    const std::string dtype = entry.at("dtype");
    std::vector<double> values;
    if (dtype == "f64") {
      values = Decode<double>(bytes, file);
    } else if (dtype == "f32") {
      values = Decode<float>(bytes, file);
    } else {
      throw std::runtime_error("unknown dtype '" + dtype + "' for tensor '" +
                               name + "'");
    }
    Shape shape = entry.at("shape").get<Shape>();
    if (NumElements(shape) != static_cast<int64_t>(values.size())) {
      throw std::runtime_error("tensor '" + name + "' blob holds " +
                               std::to_string(values.size()) +
                               " values but shape is " + ShapeToString(shape));
    }
    checkpoint.tensors.emplace_back(name, Tensor(std::move(shape), std::move(values)));
  }
  return checkpoint;
}

}  // namespace trajplan
