// Copyright 2026 The qmfs-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QMFS_COUNTER_RNG_H
#define QMFS_COUNTER_RNG_H

#include <cstdint>

namespace qmfs {

/// Stateless keyed mixer (splitmix64 finalizer chained over the key words).
/// The same (seed, stream, counter) always yields the same 64 bits, so
/// random streams do not depend on evaluation order or thread count.
uint64_t counter_hash(uint64_t seed, uint64_t stream, uint64_t counter);

/// Uniform on the open interval (0, 1), 53-bit resolution.
double counter_uniform(uint64_t seed, uint64_t stream, uint64_t counter);

/// Standard normal variate via Box-Muller on two counter draws.
double counter_normal(uint64_t seed, uint64_t stream, uint64_t counter);

/// Per-trajectory seed derived from a master seed and a batch index.
uint64_t derive_seed(uint64_t master_seed, uint64_t index);

}  // namespace qmfs

#endif
