#include "tt/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace tt {

namespace {

thread_local bool g_grad_enabled = false;
thread_local TapeStats g_tape;
thread_local std::uint64_t g_next_node_id = 1;

Edge make_edge(const Tensor& t) {
  Edge e;
  if (!t.defined() || t.dtype() != DType::Float32) return e;
  if (t.grad_fn()) {
    e.node = t.grad_fn();
  } else if (t.requires_grad()) {
    e.leaf = t.impl_ptr();
  }
  return e;
}

// Reachable nodes ordered by descending id; ids grow with creation, so this
// is a reverse topological order of the DAG.
// Owning pointers, so releasing one node cannot free another still listed.
std::vector<std::shared_ptr<Node>> collect(const std::shared_ptr<Node>& root) {
  std::vector<std::shared_ptr<Node>> out;
  std::unordered_set<Node*> seen;
  std::vector<std::shared_ptr<Node>> stack{root};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto n = std::move(stack.back());
    stack.pop_back();
    for (const auto& e : n->inputs) {
      if (e.node && seen.insert(e.node.get()).second) stack.push_back(e.node);
    }
    out.push_back(std::move(n));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a->id > b->id; });
  return out;
}

void require_graph(const Tensor& t) {
  if (!t.defined() || !t.grad_fn()) {
    fail(ErrorCode::DisconnectedGraph, "tensor was not produced by a recorded op");
  }
  if (t.grad_fn()->released) {
    fail(ErrorCode::DisconnectedGraph, "graph was already released by a previous backward");
  }
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }
void enable_autograd() { g_grad_enabled = true; }
void disable_autograd() { g_grad_enabled = false; }

GradModeGuard::GradModeGuard(bool enabled) : previous_(g_grad_enabled) {
  g_grad_enabled = enabled;
}
GradModeGuard::~GradModeGuard() { g_grad_enabled = previous_; }

Node::Node() : id(g_next_node_id++) {
  g_tape.nodes_created += 1;
  g_tape.live_nodes += 1;
}

Node::~Node() { g_tape.live_nodes -= 1; }

void Node::release() {
  inputs.clear();
  saved.clear();
  backward = nullptr;
  released = true;
}

const TapeStats& tape_stats() { return g_tape; }

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!g_grad_enabled) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && (t->requires_grad() || t->grad_fn())) return true;
  }
  return false;
}

bool should_record(const std::vector<Tensor>& inputs) {
  if (!g_grad_enabled) return false;
  for (const Tensor& t : inputs) {
    if (t.defined() && (t.requires_grad() || t.grad_fn())) return true;
  }
  return false;
}

Tensor record(Tensor out, std::string op, const std::vector<Tensor>& inputs,
              std::vector<Tensor> saved, BackwardFn backward) {
  if (!should_record(inputs)) return out;
  auto node = std::make_shared<Node>();
  node->op = std::move(op);
  node->inputs.reserve(inputs.size());
  for (const auto& t : inputs) node->inputs.push_back(make_edge(t));
  node->saved.reserve(saved.size());
  for (auto& s : saved) node->saved.push_back(s.detach());
  node->backward = std::move(backward);
  out.impl()->grad_fn = std::move(node);
  out.impl()->requires_grad = true;
  return out;
}

void backward(const Tensor& root, bool retain_graph) {
  if (!g_grad_enabled) {
    fail(ErrorCode::GradModeOff, "backward() requires enable_autograd()");
  }
  if (root.defined() && root.numel() != 1) {
    fail(ErrorCode::BackwardFromNonScalar,
         "backward() from tensor of shape " + shape_str(root.shape()));
  }
  require_graph(root);

  const auto order = collect(root.grad_fn());
  std::unordered_map<Node*, Tensor> pending;
  pending.emplace(root.grad_fn().get(), Tensor::ones(root.shape()));

  NoGradGuard no_grad;
  for (const auto& owned : order) {
    Node* node = owned.get();
    auto it = pending.find(node);
    if (it == pending.end()) continue;
    const Tensor grad_out = it->second;
    pending.erase(it);
    auto grads = node->backward(*node, grad_out);
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      const Edge& e = node->inputs[i];
      if (!e.active() || i >= grads.size() || !grads[i].defined()) continue;
      if (e.node) {
        auto [slot, inserted] = pending.try_emplace(e.node.get(), grads[i]);
        if (!inserted) {
          // Never mutate a gradient buffer another rule may still alias.
          Tensor sum = slot->second.clone();
          auto dst = sum.data_mut();
          auto src = grads[i].data();
          for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
          slot->second = sum;
        }
      } else {
        Tensor(e.leaf).accumulate_grad(grads[i]);
      }
    }
  }
  if (!retain_graph) {
    for (const auto& node : order) node->release();
  }
}

void zero_grad(const std::vector<Tensor>& params) {
  for (auto p : params) p.clear_grad();
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           float epsilon, double tolerance) {
  GradCheckReport report;
  Tensor input = x;
  input.clear_grad();
  std::vector<float> analytic(input.numel(), 0.0f);
  {
    GradModeGuard on(true);
    Tensor y = f(input);
    backward(y);
    if (auto g = input.grad()) {
      auto gd = g->data();
      std::copy(gd.begin(), gd.end(), analytic.begin());
    }
  }
  input.clear_grad();

  NoGradGuard off;
  auto xs = input.data_mut();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const float original = xs[i];
    const float up = original + epsilon;
    const float down = original - epsilon;
    xs[i] = up;
    const double f_up = f(input).item();
    xs[i] = down;
    const double f_down = f(input).item();
    xs[i] = original;
    const double numeric = (f_up - f_down) / (static_cast<double>(up) - down);
    const double a = analytic[i];
    const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
    if (!(err <= report.max_rel_error)) {
      report.max_rel_error = err;
      report.worst_index = i;
    }
  }
  report.pass = report.max_rel_error <= tolerance;
  return report;
}

GraphCount count_graph(const Tensor& t) {
  require_graph(t);
  GraphCount out;
  std::unordered_set<const Storage*> buffers;
  for (const auto& n : collect(t.grad_fn())) {
    out.node_count += 1;
    for (const auto& s : n->saved) {
      if (buffers.insert(s.storage_ptr().get()).second) out.saved_bytes += s.storage().bytes();
    }
  }
  return out;
}

std::string export_dot(const Tensor& t) {
  require_graph(t);
  std::ostringstream os;
  os << "digraph tape {\n";
  std::unordered_map<const TensorImpl*, std::size_t> leaves;
  for (const auto& n : collect(t.grad_fn())) {
    os << "  n" << n->id << " [label=\"" << n->op << '#' << n->id << "\"];\n";
    for (const auto& e : n->inputs) {
      if (e.node) {
        os << "  n" << e.node->id << " -> n" << n->id << ";\n";
      } else if (e.leaf) {
        auto [it, inserted] = leaves.try_emplace(e.leaf.get(), leaves.size());
        if (inserted) {
          os << "  leaf" << it->second << " [label=\"leaf#" << it->second << ' '
             << shape_str(e.leaf->shape) << "\", shape=box];\n";
        }
        os << "  leaf" << it->second << " -> n" << n->id << ";\n";
      }
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace tt
