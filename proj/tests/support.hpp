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

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tdt/autodiff.hpp"
#include "tdt/ops.hpp"
#include "tdt/rng.hpp"

namespace tdt::testing {

inline Tensor random_tensor(Shape shape, RngStream& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = scale * rng.normal();
  return t;
}

inline double rel_err(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradReport {
  double max_rel_err = 0.0;
  std::string worst;
  std::size_t checked = 0;
  std::size_t below_floor = 0;  // coordinates where both estimates are smaller than the floor
  double max_abs_err_below_floor = 0.0;
};

/// Central differences against reverse mode for every parameter in `params`.
/// `loss` must build the scalar from the parameters' current values.
inline GradReport check_gradients(std::span<Parameter* const> params, const std::function<Var()>& loss,
                                  std::size_t per_param, RngStream& rng, double h = 1e-5,
                                  double floor = 1e-6) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Tape::Recording rec(tape);
    const Var l = loss();
    tape.backward(l);
  }
  GradReport report;
  for (Parameter* p : params) {
    const std::size_t n = p->value.size();
    std::vector<std::size_t> coords;
    if (n <= per_param) {
      for (std::size_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (std::size_t i = 0; i < per_param; ++i) coords.push_back(rng.below(n));
    }
    for (std::size_t i : coords) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double up = loss().value().item();
      p->value[i] = saved - h;
      const double down = loss().value().item();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double e = rel_err(p->grad[i], numeric, floor);
      ++report.checked;
      if (std::max(std::abs(p->grad[i]), std::abs(numeric)) < floor) {
        ++report.below_floor;
        report.max_abs_err_below_floor = std::max(report.max_abs_err_below_floor, std::abs(p->grad[i] - numeric));
      }
      if (e > report.max_rel_err) {
        report.max_rel_err = e;
        report.worst = p->name + "[" + std::to_string(i) + "] analytic=" + std::to_string(p->grad[i]) +
                       " numeric=" + std::to_string(numeric);
      }
    }
  }
  return report;
}

/// Weighted sum so that every output coordinate reaches the loss with a distinct weight.
inline Var probe_loss(const Var& out, const Tensor& weights) { return sum(mul(out, Var(weights))); }

}  // namespace tdt::testing
