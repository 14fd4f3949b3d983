#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "tt/tensor.hpp"

namespace tt {

// Grad mode is per thread and off by default. While off, ops never record
// nodes and requires_grad cannot be requested.
bool grad_enabled();
void enable_autograd();
void disable_autograd();

class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled);
  ~GradModeGuard();
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool previous_;
};

class NoGradGuard : public GradModeGuard {
 public:
  NoGradGuard() : GradModeGuard(false) {}
};

// Points either at the producing node of a non-leaf input or at a leaf
// that wants a gradient. Both empty means the input is not differentiated.
struct Edge {
  std::shared_ptr<Node> node;
  std::shared_ptr<TensorImpl> leaf;
  bool active() const { return node != nullptr || leaf != nullptr; }
};

using BackwardFn = std::function<std::vector<Tensor>(const Node& node, const Tensor& grad_out)>;

struct Node {
  Node();
  ~Node();
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  std::uint64_t id = 0;
  std::string op;
  std::vector<Edge> inputs;
  // Values the backward rule reads; these are what count_graph reports.
  std::vector<Tensor> saved;
  // Returns one gradient per input (undefined Tensor for inactive edges).
  BackwardFn backward;
  bool released = false;

  void release();
};

struct TapeStats {
  std::uint64_t nodes_created = 0;
  std::int64_t live_nodes = 0;
};

const TapeStats& tape_stats();

// True when grad mode is on and any input participates in the graph.
bool should_record(std::initializer_list<const Tensor*> inputs);
bool should_record(const std::vector<Tensor>& inputs);

/// Attaches a node producing `out`. No-op (returns out unchanged) when
/// should_record(inputs) is false. Saved tensors are stored detached.
Tensor record(Tensor out, std::string op, const std::vector<Tensor>& inputs,
              std::vector<Tensor> saved, BackwardFn backward);

/// Reverse-mode pass from a single-element tensor. Gradients are summed
/// into every reachable leaf with requires_grad. The graph is released
/// afterwards unless retain_graph is set.
void backward(const Tensor& root, bool retain_graph = false);

// Unsets (not zero-fills) each parameter's grad.
void zero_grad(const std::vector<Tensor>& params);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool pass = false;
};

/// Analytic gradient vs central differences, per coordinate of x. The
/// relative error of a coordinate is |a - n| / max(1, |a|, |n|); the
/// numeric slope divides by the perturbation actually representable in
/// Float32 rather than the nominal 2*epsilon.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           float epsilon, double tolerance);

struct GraphCount {
  std::size_t node_count = 0;
  std::size_t saved_bytes = 0;  // distinct saved buffers
};

GraphCount count_graph(const Tensor& t);

// Graphviz text: one node per op labelled "op#id", one edge per dependency.
std::string export_dot(const Tensor& t);

}  // namespace tt
