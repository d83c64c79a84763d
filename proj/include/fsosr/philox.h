/*
 * Copyright 2026 The fsosr Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FSOSR_PHILOX_H_
#define FSOSR_PHILOX_H_

#include <array>
#include <cstdint>

namespace fsosr {

// Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3"). A stream is identified by a 64-bit key and
// the upper 96 bits of the counter; the low 32 bits count blocks within the
// stream. All derived draws use integer arithmetic only, so a stream yields
// the same values on every platform.
class Philox {
 public:
  // `stream_tag` separates independent uses of the same (key, index) pair.
  Philox(uint64_t key, uint64_t index, uint32_t stream_tag = 0);

  uint32_t NextU32();
  uint64_t NextU64();

  // Uniform integer in [0, bound). bound must be > 0.
  uint64_t Uniform(uint64_t bound);

  // Uniform double in [0, 1) with 53 random bits.
  double UniformDouble();

  // Standard normal via Box-Muller. Uses libm, so bit-exactness across
  // platforms is not guaranteed for this draw.
  double Normal();

  // Raw block function, exposed for known-answer tests.
  static std::array<uint32_t, 4> Block(std::array<uint32_t, 4> counter,
                                       std::array<uint32_t, 2> key);

 private:
  void Refill();

  std::array<uint32_t, 4> counter_;
  std::array<uint32_t, 2> key_;
  std::array<uint32_t, 4> buffer_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace fsosr

#endif  // FSOSR_PHILOX_H_
