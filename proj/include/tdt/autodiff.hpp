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

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "tdt/tensor.hpp"

namespace tdt {

/// A trainable tensor plus its accumulated gradient.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value)
      : name(std::move(name)), value(std::move(value)), grad(this->value.shape()) {}

  void zero_grad() {
    if (grad.shape() != value.shape()) {
      grad = Tensor(value.shape());
    } else {
      grad.fill(0.0);
    }
  }

  std::string name;
  Tensor value;
  Tensor grad;
};

namespace detail {

struct Node {
  const Tensor& value() const noexcept { return external ? *external : owned; }
  /// Gradient buffer, zero-initialized on first use.
  Tensor& grad_buffer() {
    if (grad.empty() && value().size() != 0) grad = Tensor(value().shape());
    return grad;
  }

  Tensor owned;
  const Tensor* external = nullptr;
  Tensor grad;
  Parameter* param = nullptr;
  bool requires_grad = false;
  const char* op = "const";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
};

}  // namespace detail

/// Handle to a value in the computation. Copies share the same node.
class Var {
 public:
  Var() = default;
  /// Non-differentiable constant.
  explicit Var(Tensor value);
  /// Leaf bound to a parameter. Under an active tape the leaf is cached, so
  /// repeated uses within one forward share one node.
  static Var of(Parameter& p);

  const Tensor& value() const { return node_->value(); }
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  /// Gradient accumulated during the last backward; empty if none reached this node.
  const Tensor& grad() const { return node_->grad; }
  bool valid() const noexcept { return static_cast<bool>(node_); }

  const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }

 private:
  explicit Var(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  friend class Tape;
  friend Var make_op(Tensor, const char*, std::initializer_list<Var>,
                     std::function<void(detail::Node&)>);
  std::shared_ptr<detail::Node> node_;
};

/// Ordered record of the differentiable operations executed while it is
/// active on the current thread. Nodes are only retained (and intermediates
/// only kept alive) when a tape is recording.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Activates a tape on this thread for the guard's lifetime.
  class Recording {
   public:
    explicit Recording(Tape& tape) noexcept;
    ~Recording();
    Recording(const Recording&) = delete;
    Recording& operator=(const Recording&) = delete;

   private:
    Tape* previous_;
  };

  static Tape* active() noexcept;

  /// Reverse sweep from a scalar loss. Parameter leaves add their gradient
  /// into Parameter::grad.
  void backward(const Var& loss);
  /// Reverse sweep that leaves parameter gradients on the leaves; call
  /// flush_param_grads() to add them into the parameters later.
  void backward_to_leaves(const Var& loss);
  void flush_param_grads();

  void clear();
  std::size_t size() const noexcept { return nodes_.size(); }
  /// Op names in recording order.
  std::vector<std::string> op_names() const;
  /// Tape indices visited by the last backward sweep, in visit order.
  const std::vector<std::size_t>& last_visit_order() const noexcept { return visits_; }

  void record(std::shared_ptr<detail::Node> node);
  std::shared_ptr<detail::Node> leaf_for(Parameter& p);

 private:
  void sweep(const Var& loss);

  std::vector<std::shared_ptr<detail::Node>> nodes_;
  std::unordered_map<Parameter*, std::shared_ptr<detail::Node>> leaves_;
  std::vector<std::size_t> visits_;
};

/// Creates the result node of an operation. `backward` receives the result
/// node, whose grad is populated, and must add into its parents' grads.
/// It is only stored when some input requires grad under an active tape.
Var make_op(Tensor value, const char* op, std::initializer_list<Var> inputs,
            std::function<void(detail::Node&)> backward);

}  // namespace tdt
