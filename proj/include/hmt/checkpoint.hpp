// Copyright 2026 The HybridMT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Single-file model checkpoints.
//
// Layout, all integers little-endian:
//   "HMTCKPT\0"  u32 version  u64 body_bytes
//   body:  u32 config_len, config text (ModelConfig::to_text)
//          u32 tensor_count, then per tensor:
//            u32 name_len, name, u32 rank, u64 dims[rank], f64 values[numel]
//   u64 FNV-1a hash of the body

#include <cstdint>
#include <filesystem>
#include <memory>

#include "hmt/config.hpp"
#include "hmt/model.hpp"
#include "hmt/params.hpp"

namespace hmt {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ModelParams& params);

struct LoadedCheckpoint {
  ModelConfig config;
  std::shared_ptr<ModelParams> params;
};

// Throws CheckpointVersionError, CheckpointTruncatedError,
// CheckpointChecksumError, or CheckpointError for any other malformation.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

Model load_model(const std::filesystem::path& path);

std::uint64_t fnv1a(std::span<const unsigned char> bytes);

}  // namespace hmt
