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

#include "tdt/optim.hpp"

#include <cmath>

namespace tdt {

void adam_step(std::span<Parameter* const> params, std::vector<AdamMoments>& moments,
               const AdamConfig& cfg, std::int64_t t) {
  if (t < 1) throw UsageError("adam_step: t must be >= 1");
  for (const Parameter* p : params) {
    if (!p->grad.all_finite()) throw NumericError("non-finite gradient in parameter '" + p->name + "'");
  }
  if (moments.size() != params.size()) {
    moments.clear();
    for (const Parameter* p : params) moments.push_back({Tensor(p->value.shape()), Tensor(p->value.shape())});
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    AdamMoments& mo = moments[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      mo.m[i] = cfg.beta1 * mo.m[i] + (1.0 - cfg.beta1) * g;
      mo.v[i] = cfg.beta2 * mo.v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = mo.m[i] / c1;
      const double vhat = mo.v[i] / c2;
      p.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {}

void Adam::step() {
  adam_step(params_, moments_, cfg_, t_ + 1);
  ++t_;
}

void Adam::zero_grads() {
  for (Parameter* p : params_) p->zero_grad();
}

}  // namespace tdt
