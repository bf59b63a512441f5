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

#include "tdt/autodiff.hpp"

namespace tdt {

namespace {
thread_local Tape* g_active_tape = nullptr;
}  // namespace

Var::Var(Tensor value) : node_(std::make_shared<detail::Node>()) {
  node_->owned = std::move(value);
}

Var Var::of(Parameter& p) {
  if (Tape* tape = Tape::active()) return Var(tape->leaf_for(p));
  auto n = std::make_shared<detail::Node>();
  n->external = &p.value;
  n->param = &p;
  n->op = "param";
  return Var(std::move(n));
}

Tape::Recording::Recording(Tape& tape) noexcept : previous_(g_active_tape) {
  g_active_tape = &tape;
}

Tape::Recording::~Recording() { g_active_tape = previous_; }

Tape* Tape::active() noexcept { return g_active_tape; }

void Tape::record(std::shared_ptr<detail::Node> node) { nodes_.push_back(std::move(node)); }

std::shared_ptr<detail::Node> Tape::leaf_for(Parameter& p) {
  auto it = leaves_.find(&p);
  if (it != leaves_.end()) return it->second;
  auto n = std::make_shared<detail::Node>();
  n->external = &p.value;
  n->param = &p;
  n->requires_grad = true;
  n->op = "param";
  leaves_.emplace(&p, n);
  nodes_.push_back(n);
  return n;
}

void Tape::sweep(const Var& loss) {
  if (!loss.valid() || loss.value().size() != 1) {
    throw UsageError("backward requires a scalar loss, got shape " +
                     (loss.valid() ? shape_str(loss.shape()) : std::string("<null>")));
  }
  if (!loss.requires_grad()) throw UsageError("loss does not depend on any recorded parameter");
  visits_.clear();
  for (auto& n : nodes_) n->grad = Tensor();
  loss.node()->grad_buffer()[0] += 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    detail::Node& n = *nodes_[i];
    if (n.grad.empty()) continue;
    visits_.push_back(i);
    if (n.backward) n.backward(n);
  }
}

void Tape::backward(const Var& loss) {
  sweep(loss);
  flush_param_grads();
}

void Tape::backward_to_leaves(const Var& loss) { sweep(loss); }

void Tape::flush_param_grads() {
  // Leaves are flushed in recording order so the summation order is fixed.
  for (auto& n : nodes_) {
    if (!n->param || n->grad.empty()) continue;
    n->param->grad += n->grad;
    n->grad = Tensor();
  }
}

void Tape::clear() {
  nodes_.clear();
  leaves_.clear();
  visits_.clear();
}

std::vector<std::string> Tape::op_names() const {
  std::vector<std::string> out;
  out.reserve(nodes_.size());
  for (const auto& n : nodes_) out.emplace_back(n->op);
  return out;
}

Var make_op(Tensor value, const char* op, std::initializer_list<Var> inputs,
            std::function<void(detail::Node&)> backward) {
  require_finite(value, op);
  auto n = std::make_shared<detail::Node>();
  n->owned = std::move(value);
  n->op = op;
  Tape* tape = Tape::active();
  bool needs = false;
  for (const Var& v : inputs) needs = needs || v.requires_grad();
  if (tape && needs) {
    n->requires_grad = true;
    n->parents.reserve(inputs.size());
    for (const Var& v : inputs) n->parents.push_back(v.node());
    n->backward = std::move(backward);
    tape->record(n);
  }
  return Var(std::move(n));
}

}  // namespace tdt
