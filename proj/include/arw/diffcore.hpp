#pragma once

// Reverse-mode differentiation over small matrix graphs.
//
// A Tape records nodes in construction order, which is also a topological
// order. Values are computed by forward(); gradients are built as ordinary
// nodes on the same tape, so a gradient can itself be differentiated
// (needed for penalties on input-gradient norms).

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace arw::diff {

using Matrix = Eigen::MatrixXd;
using NodeId = std::size_t;

struct Shape {
  Eigen::Index rows = 1;
  Eigen::Index cols = 1;

  bool operator==(const Shape&) const = default;
  bool scalar() const { return rows == 1 && cols == 1; }
  std::string str() const;
};

enum class Op {
  Input,
  Parameter,
  Constant,
  Add,
  Mul,         // elementwise, equal shapes
  MatMul,      // op(a) * op(b), op = optional transpose
  Relu,
  Sigmoid,
  Log,
  Square,
  Sqrt,
  Sum,         // reduce along an Axis
  Broadcast,   // 1x1, 1xc or rx1 expanded to a full shape
  Step,        // 1[x > 0]; the derivative of Relu, itself flat
  Reciprocal,  // 1/x; closes Log and Sqrt under differentiation
};

const char* op_name(Op op);

// All -> 1x1, Rows -> r x 1 (one sum per row), Cols -> 1 x c.
enum class Axis { All, Rows, Cols };

struct Node {
  NodeId id = 0;
  Op op = Op::Constant;
  Shape shape;
  std::vector<NodeId> parents;
  bool trans_a = false;
  bool trans_b = false;
  Axis axis = Axis::All;
  std::string name;
};

class DiffError : public std::runtime_error {
 public:
  DiffError(NodeId node, const std::string& what);
  NodeId node() const { return node_; }

 private:
  NodeId node_;
};

using Bindings = std::unordered_map<NodeId, Matrix>;

class Tape {
 public:
  // Leaves.
  NodeId input(Shape shape, std::string name = {});
  NodeId parameter(Shape shape, std::string name = {});
  NodeId constant(Matrix value);
  NodeId constant(double value);

  // Primitive ops. Shape rules are checked here.
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId matmul(NodeId a, NodeId b, bool trans_a = false, bool trans_b = false);
  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId log(NodeId x);
  NodeId square(NodeId x);
  NodeId sqrt(NodeId x);
  NodeId sum(NodeId x, Axis axis = Axis::All);
  NodeId broadcast(NodeId x, Shape shape);
  NodeId step(NodeId x);
  NodeId reciprocal(NodeId x);

  // Compositions of the primitives above.
  NodeId scale(NodeId x, double c);
  NodeId add_scalar(NodeId x, double c);
  NodeId sub(NodeId a, NodeId b);
  NodeId mean(NodeId x);

  // Binds every input and parameter node and evaluates the whole tape.
  // Throws DiffError naming the node for an unbound leaf or a shape mismatch.
  void forward(Bindings bindings);

  // Evaluates nodes appended since the last forward()/evaluate_pending().
  void evaluate_pending();

  // Appends nodes computing d(root)/d(wrt[k]) and returns their ids. The
  // new nodes are ordinary tape nodes and can be differentiated again.
  // Unreachable wrt nodes get a zero constant.
  std::vector<NodeId> gradient_nodes(NodeId root, std::span<const NodeId> wrt);
  NodeId gradient_as_node(NodeId root, NodeId wrt);

  // Numeric gradients of a scalar root. Requires forward() to have run.
  std::vector<Matrix> backward(NodeId root, std::span<const NodeId> wrt);
  // Gradients for every input and parameter node the root depends on.
  std::unordered_map<NodeId, Matrix> backward(NodeId root);

  const Node& node(NodeId id) const { return nodes_.at(id); }
  const Matrix& value(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  NodeId push(Node n);
  Matrix compute(const Node& n) const;
  Shape shape_of(NodeId id) const { return nodes_.at(id).shape; }

  std::vector<Node> nodes_;
  std::vector<Matrix> values_;
  std::size_t evaluated_ = 0;
};

}  // namespace arw::diff
