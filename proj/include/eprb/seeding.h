// Copyright 2026 The eprb Authors
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

#ifndef EPRB_SEEDING_H
#define EPRB_SEEDING_H

#include <cstdint>
#include <string_view>

namespace eprb {

/// SplitMix64 finalizer.
constexpr uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// 64-bit FNV-1a.
constexpr uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Every random stream in a run derives from one root seed:
///   seed(root, purpose, index) = splitmix64(splitmix64(root ^ fnv1a64(purpose)) + index)
/// e.g. ("simulate", experiment), ("restart", r), ("settings-alice", 0).
constexpr uint64_t derive_seed(uint64_t root, std::string_view purpose, uint64_t index = 0) {
    return splitmix64(splitmix64(root ^ fnv1a64(purpose)) + index);
}

}  // namespace eprb

#endif
