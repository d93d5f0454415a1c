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

// Scoped wall-clock attribution for the latency breakdown. Model code opens a
// ScopedTiming around each submodule; when no sink is installed on the thread
// the scope costs one thread-local load.

#include <chrono>
#include <cstddef>

namespace hmt {

enum class Category : std::size_t {
  kEncoding = 0,
  kAttention,
  kSelfAttOrGru,
  kFfn,
  kSoftmax,
  kDecoding,
  kCount,
};

class TimingSink {
 public:
  virtual ~TimingSink() = default;
  virtual void add(Category category, double seconds) = 0;
};

TimingSink* active_timing_sink();

class TimingSinkScope {
 public:
  explicit TimingSinkScope(TimingSink* sink);
  ~TimingSinkScope();
  TimingSinkScope(const TimingSinkScope&) = delete;
  TimingSinkScope& operator=(const TimingSinkScope&) = delete;

 private:
  TimingSink* previous_;
};

class ScopedTiming {
 public:
  using Clock = std::chrono::steady_clock;

  explicit ScopedTiming(Category category)
      : sink_(active_timing_sink()), category_(category) {
    if (sink_) start_ = Clock::now();
  }
  ~ScopedTiming() {
    if (sink_) sink_->add(category_, std::chrono::duration<double>(Clock::now() - start_).count());
  }
  ScopedTiming(const ScopedTiming&) = delete;
  ScopedTiming& operator=(const ScopedTiming&) = delete;

 private:
  TimingSink* sink_;
  Category category_;
  Clock::time_point start_{};
};

}  // namespace hmt
