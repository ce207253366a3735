// Copyright 2026 The Eaglet Authors.
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

#pragma once

// Scalar type of every tensor. The default build is 32-bit. Defining
// EAGLET_DOUBLE produces a 64-bit variant of the library, used where finite
// differences need more headroom than float offers. Each variant lives in
// its own inline namespace so both can be linked into one binary.
#ifdef EAGLET_DOUBLE
#define EAGLET_ABI f64
#else
#define EAGLET_ABI f32
#endif

namespace eaglet {
inline namespace EAGLET_ABI {

#ifdef EAGLET_DOUBLE
using real = double;
#else
using real = float;
#endif

}  // namespace EAGLET_ABI
}  // namespace eaglet
