// Copyright 2026 The TDT Authors
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

#include <cstdint>
#include <vector>

#include "tdt/autodiff.hpp"

namespace tdt {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment estimates for one parameter.
struct AdamMoments {
  Tensor m;
  Tensor v;
};

/// One bias-corrected Adam update at step t (t >= 1) for every parameter,
/// using each Parameter::grad. Throws NumericError naming the first
/// parameter whose gradient is not finite; nothing is updated in that case.
void adam_step(std::span<Parameter* const> params, std::vector<AdamMoments>& moments,
               const AdamConfig& cfg, std::int64_t t);

/// Adam with internally tracked moments and step counter.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg);

  void step();
  void zero_grads();
  std::int64_t steps_taken() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return cfg_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<AdamMoments> moments_;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

}  // namespace tdt
