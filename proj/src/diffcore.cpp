#include "arw/diffcore.hpp"

#include <cmath>
#include <optional>
#include <sstream>

namespace arw::diff {

std::string Shape::str() const {
  std::ostringstream os;
  os << rows << "x" << cols;
  return os.str();
}

const char* op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Parameter: return "parameter";
    case Op::Constant: return "constant";
    case Op::Add: return "add";
    case Op::Mul: return "mul";
    case Op::MatMul: return "matmul";
    case Op::Relu: return "relu";
    case Op::Sigmoid: return "sigmoid";
    case Op::Log: return "log";
    case Op::Square: return "square";
    case Op::Sqrt: return "sqrt";
    case Op::Sum: return "sum";
    case Op::Broadcast: return "broadcast";
    case Op::Step: return "step";
    case Op::Reciprocal: return "reciprocal";
  }
  return "?";
}

DiffError::DiffError(NodeId node, const std::string& what)
    : std::runtime_error("node " + std::to_string(node) + ": " + what), node_(node) {}

NodeId Tape::push(Node n) {
  n.id = nodes_.size();
  nodes_.push_back(std::move(n));
  values_.emplace_back();
  return nodes_.back().id;
}

NodeId Tape::input(Shape shape, std::string name) {
  Node n;
  n.op = Op::Input;
  n.shape = shape;
  n.name = std::move(name);
  return push(std::move(n));
}

NodeId Tape::parameter(Shape shape, std::string name) {
  Node n;
  n.op = Op::Parameter;
  n.shape = shape;
  n.name = std::move(name);
  return push(std::move(n));
}

NodeId Tape::constant(Matrix value) {
  Node n;
  n.op = Op::Constant;
  n.shape = {value.rows(), value.cols()};
  NodeId id = push(std::move(n));
  values_[id] = std::move(value);
  return id;
}

NodeId Tape::constant(double value) {
  return constant(Matrix::Constant(1, 1, value));
}

namespace {

Node unary(Op op, NodeId x, Shape shape) {
  Node n;
  n.op = op;
  n.shape = shape;
  n.parents = {x};
  return n;
}

}  // namespace

NodeId Tape::add(NodeId a, NodeId b) {
  if (shape_of(a) != shape_of(b))
    throw DiffError(nodes_.size(), "add shape mismatch " + shape_of(a).str() + " vs " + shape_of(b).str());
  Node n = unary(Op::Add, a, shape_of(a));
  n.parents.push_back(b);
  return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  if (shape_of(a) != shape_of(b))
    throw DiffError(nodes_.size(), "mul shape mismatch " + shape_of(a).str() + " vs " + shape_of(b).str());
  Node n = unary(Op::Mul, a, shape_of(a));
  n.parents.push_back(b);
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b, bool trans_a, bool trans_b) {
  Shape sa = shape_of(a), sb = shape_of(b);
  if (trans_a) std::swap(sa.rows, sa.cols);
  if (trans_b) std::swap(sb.rows, sb.cols);
  if (sa.cols != sb.rows)
    throw DiffError(nodes_.size(), "matmul inner dimension mismatch " + sa.str() + " * " + sb.str());
  Node n = unary(Op::MatMul, a, {sa.rows, sb.cols});
  n.parents.push_back(b);
  n.trans_a = trans_a;
  n.trans_b = trans_b;
  return push(std::move(n));
}

NodeId Tape::relu(NodeId x) { return push(unary(Op::Relu, x, shape_of(x))); }
NodeId Tape::sigmoid(NodeId x) { return push(unary(Op::Sigmoid, x, shape_of(x))); }
NodeId Tape::log(NodeId x) { return push(unary(Op::Log, x, shape_of(x))); }
NodeId Tape::square(NodeId x) { return push(unary(Op::Square, x, shape_of(x))); }
NodeId Tape::sqrt(NodeId x) { return push(unary(Op::Sqrt, x, shape_of(x))); }
NodeId Tape::step(NodeId x) { return push(unary(Op::Step, x, shape_of(x))); }
NodeId Tape::reciprocal(NodeId x) { return push(unary(Op::Reciprocal, x, shape_of(x))); }

NodeId Tape::sum(NodeId x, Axis axis) {
  Shape s = shape_of(x);
  Shape out{1, 1};
  if (axis == Axis::Rows) out = {s.rows, 1};
  if (axis == Axis::Cols) out = {1, s.cols};
  Node n = unary(Op::Sum, x, out);
  n.axis = axis;
  return push(std::move(n));
}

NodeId Tape::broadcast(NodeId x, Shape shape) {
  const Shape s = shape_of(x);
  const bool ok = s.scalar() || (s.rows == 1 && s.cols == shape.cols) ||
                  (s.cols == 1 && s.rows == shape.rows);
  if (!ok)
    throw DiffError(nodes_.size(), "cannot broadcast " + s.str() + " to " + shape.str());
  return push(unary(Op::Broadcast, x, shape));
}

NodeId Tape::scale(NodeId x, double c) {
  return mul(x, broadcast(constant(c), shape_of(x)));
}

NodeId Tape::add_scalar(NodeId x, double c) {
  return add(x, broadcast(constant(c), shape_of(x)));
}

NodeId Tape::sub(NodeId a, NodeId b) { return add(a, scale(b, -1.0)); }

NodeId Tape::mean(NodeId x) {
  const Shape s = shape_of(x);
  return scale(sum(x, Axis::All), 1.0 / static_cast<double>(s.rows * s.cols));
}

const Matrix& Tape::value(NodeId id) const {
  if (id >= evaluated_ && nodes_.at(id).op != Op::Constant)
    throw DiffError(id, "value requested before evaluation");
  return values_[id];
}

Matrix Tape::compute(const Node& n) const {
  auto in = [&](std::size_t k) -> const Matrix& { return values_[n.parents[k]]; };
  switch (n.op) {
    case Op::Input:
    case Op::Parameter:
    case Op::Constant:
      return values_[n.id];
    case Op::Add:
      return in(0) + in(1);
    case Op::Mul:
      return in(0).cwiseProduct(in(1));
    case Op::MatMul: {
      const Matrix& a = in(0);
      const Matrix& b = in(1);
      Matrix out(n.shape.rows, n.shape.cols);
      if (!n.trans_a && !n.trans_b) out.noalias() = a * b;
      else if (n.trans_a && !n.trans_b) out.noalias() = a.transpose() * b;
      else if (!n.trans_a && n.trans_b) out.noalias() = a * b.transpose();
      else out.noalias() = a.transpose() * b.transpose();
      return out;
    }
    case Op::Relu:
      return in(0).cwiseMax(0.0);
    case Op::Sigmoid:
      return in(0).unaryExpr([](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
    case Op::Log:
      return in(0).array().log().matrix();
    case Op::Square:
      return in(0).array().square().matrix();
    case Op::Sqrt:
      return in(0).array().sqrt().matrix();
    case Op::Sum:
      if (n.axis == Axis::All) return Matrix::Constant(1, 1, in(0).sum());
      if (n.axis == Axis::Rows) return in(0).rowwise().sum();
      return in(0).colwise().sum();
    case Op::Broadcast: {
      const Matrix& x = in(0);
      if (x.rows() == 1 && x.cols() == 1) return Matrix::Constant(n.shape.rows, n.shape.cols, x(0, 0));
      if (x.rows() == 1) return x.replicate(n.shape.rows, 1);
      return x.replicate(1, n.shape.cols);
    }
    case Op::Step:
      return (in(0).array() > 0.0).cast<double>().matrix();
    case Op::Reciprocal:
      return in(0).cwiseInverse();
  }
  throw DiffError(n.id, "unknown op");
}

void Tape::forward(Bindings bindings) {
  for (Node& n : nodes_) {
    if (n.op == Op::Input || n.op == Op::Parameter) {
      auto it = bindings.find(n.id);
      if (it == bindings.end())
        throw DiffError(n.id, std::string("unbound ") + op_name(n.op) +
                                  (n.name.empty() ? "" : " '" + n.name + "'"));
      Matrix& v = it->second;
      if (v.rows() != n.shape.rows || v.cols() != n.shape.cols)
        throw DiffError(n.id, "bound value " + Shape{v.rows(), v.cols()}.str() +
                                  " does not match declared shape " + n.shape.str());
      values_[n.id] = std::move(v);
    } else if (n.op != Op::Constant) {
      values_[n.id] = compute(n);
    }
  }
  evaluated_ = nodes_.size();
}

void Tape::evaluate_pending() {
  for (std::size_t id = evaluated_; id < nodes_.size(); ++id) {
    const Node& n = nodes_[id];
    if (n.op == Op::Input || n.op == Op::Parameter)
      throw DiffError(id, "leaf added after forward(); call forward() again");
    if (n.op != Op::Constant) values_[id] = compute(n);
  }
  evaluated_ = nodes_.size();
}

std::vector<NodeId> Tape::gradient_nodes(NodeId root, std::span<const NodeId> wrt) {
  if (root >= nodes_.size()) throw DiffError(root, "no such node");
  if (!shape_of(root).scalar())
    throw DiffError(root, "gradient root must be scalar, got " + shape_of(root).str());

  // reaches[i]: some wrt node is i or an ancestor of i along differentiable edges.
  std::vector<char> reaches(root + 1, 0);
  for (NodeId w : wrt)
    if (w <= root) reaches[w] = 1;
  for (NodeId i = 0; i <= root; ++i) {
    if (reaches[i] || nodes_[i].op == Op::Step) continue;
    for (NodeId p : nodes_[i].parents)
      if (reaches[p]) {
        reaches[i] = 1;
        break;
      }
  }

  std::vector<std::optional<NodeId>> adj(root + 1);
  auto accumulate = [&](NodeId target, NodeId contrib) {
    if (!reaches[target]) return;
    adj[target] = adj[target] ? add(*adj[target], contrib) : contrib;
  };

  if (reaches[root]) adj[root] = constant(1.0);
  for (NodeId i = root + 1; i-- > 0;) {
    if (!adj[i] || !reaches[i]) continue;
    const Node n = nodes_[i];  // copy: push() may reallocate nodes_
    const NodeId g = *adj[i];
    switch (n.op) {
      case Op::Input:
      case Op::Parameter:
      case Op::Constant:
      case Op::Step:
        break;
      case Op::Add:
        accumulate(n.parents[0], g);
        accumulate(n.parents[1], g);
        break;
      case Op::Mul:
        if (reaches[n.parents[0]]) accumulate(n.parents[0], mul(g, n.parents[1]));
        if (reaches[n.parents[1]]) accumulate(n.parents[1], mul(g, n.parents[0]));
        break;
      case Op::MatMul: {
        const NodeId a = n.parents[0], b = n.parents[1];
        if (reaches[a]) {
          accumulate(a, n.trans_a ? matmul(b, g, n.trans_b, true)
                                  : matmul(g, b, false, !n.trans_b));
        }
        if (reaches[b]) {
          accumulate(b, n.trans_b ? matmul(g, a, true, n.trans_a)
                                  : matmul(a, g, !n.trans_a, false));
        }
        break;
      }
      case Op::Relu:
        accumulate(n.parents[0], mul(g, step(n.parents[0])));
        break;
      case Op::Sigmoid: {
        // s * (1 - s)
        const NodeId s = i;
        const NodeId one_minus = add_scalar(scale(s, -1.0), 1.0);
        accumulate(n.parents[0], mul(g, mul(s, one_minus)));
        break;
      }
      case Op::Log:
        accumulate(n.parents[0], mul(g, reciprocal(n.parents[0])));
        break;
      case Op::Square:
        accumulate(n.parents[0], mul(g, scale(n.parents[0], 2.0)));
        break;
      case Op::Sqrt:
        accumulate(n.parents[0], mul(g, scale(reciprocal(i), 0.5)));
        break;
      case Op::Reciprocal:
        accumulate(n.parents[0], mul(g, scale(square(i), -1.0)));
        break;
      case Op::Sum:
        accumulate(n.parents[0], broadcast(g, shape_of(n.parents[0])));
        break;
      case Op::Broadcast: {
        const Shape s = shape_of(n.parents[0]);
        NodeId r;
        if (s.scalar()) r = sum(g, Axis::All);
        else if (s.rows == 1 && n.shape.rows != 1) r = sum(g, Axis::Cols);
        else if (s.cols == 1 && n.shape.cols != 1) r = sum(g, Axis::Rows);
        else r = g;
        accumulate(n.parents[0], r);
        break;
      }
    }
  }

  std::vector<NodeId> out;
  out.reserve(wrt.size());
  for (NodeId w : wrt) {
    if (w <= root && adj[w]) out.push_back(*adj[w]);
    else out.push_back(constant(Matrix::Zero(shape_of(w).rows, shape_of(w).cols)));
  }
  return out;
}

NodeId Tape::gradient_as_node(NodeId root, NodeId wrt) {
  const NodeId ids[] = {wrt};
  return gradient_nodes(root, ids).front();
}

std::vector<Matrix> Tape::backward(NodeId root, std::span<const NodeId> wrt) {
  if (evaluated_ <= root) throw DiffError(root, "backward before forward");
  const auto ids = gradient_nodes(root, wrt);
  evaluate_pending();
  std::vector<Matrix> out;
  out.reserve(ids.size());
  for (NodeId id : ids) out.push_back(values_[id]);
  return out;
}

std::unordered_map<NodeId, Matrix> Tape::backward(NodeId root) {
  std::vector<NodeId> leaves;
  for (NodeId i = 0; i <= root && i < nodes_.size(); ++i)
    if (nodes_[i].op == Op::Input || nodes_[i].op == Op::Parameter) leaves.push_back(i);
  auto grads = backward(root, leaves);
  std::unordered_map<NodeId, Matrix> out;
  for (std::size_t k = 0; k < leaves.size(); ++k) out.emplace(leaves[k], std::move(grads[k]));
  return out;
}

}  // namespace arw::diff
