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

#include "qmfs/counter_rng.h"

#include <cmath>
#include <numbers>

namespace qmfs {

namespace {

uint64_t mix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

uint64_t counter_hash(uint64_t seed, uint64_t stream, uint64_t counter) {
    return mix(mix(mix(seed) ^ stream) ^ counter);
}

double counter_uniform(uint64_t seed, uint64_t stream, uint64_t counter) {
    uint64_t bits = counter_hash(seed, stream, counter) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double counter_normal(uint64_t seed, uint64_t stream, uint64_t counter) {
    double u1 = counter_uniform(seed, stream, 2 * counter);
    double u2 = counter_uniform(seed, stream, 2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

uint64_t derive_seed(uint64_t master_seed, uint64_t index) {
    return counter_hash(master_seed, 0x5eedULL, index);
}

}  // namespace qmfs
