#include "arw/models.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace arw {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Relu: return "relu";
  }
  return "?";
}

Activation parse_activation(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "relu") return Activation::Relu;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

void MlpSpec::validate() const {
  if (layer_widths.size() < 2)
    throw std::invalid_argument("MlpSpec needs an input width and at least one layer");
  for (int w : layer_widths)
    if (w <= 0) throw std::invalid_argument("MlpSpec widths must be positive");
}

MlpModel MlpModel::init(const MlpSpec& spec) {
  spec.validate();
  MlpModel m;
  m.spec_ = spec;
  std::mt19937_64 rng(spec.seed);
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const int in = spec.layer_widths[l];
    const int out = spec.layer_widths[l + 1];
    const double a = std::sqrt(6.0 / in);
    std::uniform_real_distribution<double> u(-a, a);
    Matrix w(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) w(r, c) = u(rng);
    m.weights_.push_back(std::move(w));
    m.biases_.push_back(Matrix::Zero(1, out));
  }
  return m;
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Matrix MlpModel::run(const Matrix& x, bool apply_output_activation) const {
  if (x.cols() != spec_.input_dim())
    throw std::invalid_argument("input width " + std::to_string(x.cols()) + " does not match model input " +
                                std::to_string(spec_.input_dim()));
  Matrix h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix next(h.rows(), weights_[l].rows());
    next.noalias() = h * weights_[l].transpose();
    next.rowwise() += biases_[l].row(0);
    const bool last = l + 1 == weights_.size();
    if (!last) {
      next = next.cwiseMax(0.0);
    } else if (apply_output_activation) {
      if (spec_.output_activation == Activation::Sigmoid) next = next.unaryExpr(&sigmoid);
      else if (spec_.output_activation == Activation::Relu) next = next.cwiseMax(0.0);
    }
    h = std::move(next);
  }
  return h;
}

Matrix MlpModel::forward(const Matrix& x) const { return run(x, true); }
Matrix MlpModel::logits(const Matrix& x) const { return run(x, false); }

MlpGraph MlpModel::build(diff::Tape& tape, diff::NodeId x, bool apply_output_activation) const {
  MlpGraph g;
  diff::NodeId h = x;
  const auto rows = tape.node(x).shape.rows;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const auto out = weights_[l].rows();
    const auto in = weights_[l].cols();
    const diff::NodeId w = tape.parameter({out, in}, "W" + std::to_string(l));
    const diff::NodeId b = tape.parameter({1, out}, "b" + std::to_string(l));
    g.params.push_back(w);
    g.params.push_back(b);
    h = tape.add(tape.matmul(h, w, false, true), tape.broadcast(b, {rows, out}));
    const bool last = l + 1 == weights_.size();
    if (!last) {
      h = tape.relu(h);
    } else if (apply_output_activation) {
      if (spec_.output_activation == Activation::Sigmoid) h = tape.sigmoid(h);
      else if (spec_.output_activation == Activation::Relu) h = tape.relu(h);
    }
  }
  g.output = h;
  return g;
}

void MlpModel::bind(const MlpGraph& g, diff::Bindings& bindings) const {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    bindings[g.params[2 * l]] = weights_[l];
    bindings[g.params[2 * l + 1]] = biases_[l];
  }
}

std::vector<Matrix*> MlpModel::parameters() {
  std::vector<Matrix*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

bool MlpModel::operator==(const MlpModel& other) const {
  if (spec_.layer_widths != other.spec_.layer_widths || spec_.output_activation != other.spec_.output_activation ||
      spec_.seed != other.spec_.seed)
    return false;
  for (std::size_t l = 0; l < weights_.size(); ++l)
    if (weights_[l] != other.weights_[l] || biases_[l] != other.biases_[l]) return false;
  return true;
}

Prediction make_prediction(double probability) {
  return {probability, probability >= 0.5 ? 1 : 0};
}

Vector extract(const Extractor& f, const Vector& x) {
  if (!f) return x;
  return f->forward(x.transpose()).row(0).transpose();
}

Matrix extract_batch(const Extractor& f, const Matrix& x) {
  if (!f) return x;
  return f->forward(x);
}

Prediction classify(const MlpModel& c, const Vector& z) {
  const Matrix logit = c.logits(z.transpose());
  return make_prediction(sigmoid(logit(0, 0)));
}

std::vector<Prediction> classify_batch(const MlpModel& c, const Matrix& z) {
  const Matrix logit = c.logits(z);
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(logit.rows()));
  for (Eigen::Index i = 0; i < logit.rows(); ++i) out.push_back(make_prediction(sigmoid(logit(i, 0))));
  return out;
}

double critic_score(const MlpModel& d, const Vector& z) {
  if (d.spec().output_activation != Activation::Identity)
    throw std::invalid_argument("critic must have identity output");
  return d.forward(z.transpose())(0, 0);
}

double weighted_cross_entropy(std::span<const double> p, std::span<const int> y, std::span<const double> w) {
  if (p.size() != y.size() || p.size() != w.size())
    throw std::invalid_argument("weighted_cross_entropy: length mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (w[i] < 0) throw std::invalid_argument("weighted_cross_entropy: negative weight");
    const double q = std::clamp(p[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    loss += w[i] * (y[i] ? -std::log(q) : -std::log(1.0 - q));
  }
  return loss;
}

diff::NodeId cross_entropy_node(diff::Tape& tape, diff::NodeId logits, std::span<const int> labels,
                                std::span<const double> coeff) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (tape.node(logits).shape != diff::Shape{n, 1} || coeff.size() != labels.size())
    throw std::invalid_argument("cross_entropy_node: shape mismatch");
  // y log s(x) + (1 - y) log s(-x); avoids log(1 - s(x)) saturating at large x.
  Matrix pos(n, 1), neg(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    pos(i, 0) = labels[static_cast<std::size_t>(i)] ? -coeff[static_cast<std::size_t>(i)] : 0.0;
    neg(i, 0) = labels[static_cast<std::size_t>(i)] ? 0.0 : -coeff[static_cast<std::size_t>(i)];
  }
  const diff::NodeId log_p = tape.log(tape.sigmoid(logits));
  const diff::NodeId log_q = tape.log(tape.sigmoid(tape.scale(logits, -1.0)));
  const diff::NodeId terms =
      tape.add(tape.mul(log_p, tape.constant(std::move(pos))), tape.mul(log_q, tape.constant(std::move(neg))));
  return tape.sum(terms);
}

std::string to_json(const MlpModel& m) {
  nlohmann::json j;
  j["format"] = "arw-mlp";
  j["version"] = 1;
  j["spec"] = {{"layer_widths", m.spec().layer_widths},
               {"output_activation", activation_name(m.spec().output_activation)},
               {"seed", m.spec().seed}};
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < m.weights().size(); ++l) {
    const Matrix& w = m.weights()[l];
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) data.push_back(w(r, c));
    const Matrix& b = m.biases()[l];
    layers.push_back({{"weight", {{"rows", w.rows()}, {"cols", w.cols()}, {"data", data}}},
                      {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
  }
  j["layers"] = layers;
  return j.dump();
}

MlpModel mlp_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("format") != "arw-mlp" || j.at("version") != 1)
    throw std::runtime_error("not an arw-mlp version 1 document");
  MlpSpec spec;
  spec.layer_widths = j.at("spec").at("layer_widths").get<std::vector<int>>();
  spec.output_activation = parse_activation(j.at("spec").at("output_activation").get<std::string>());
  spec.seed = j.at("spec").at("seed").get<std::uint64_t>();
  MlpModel m = MlpModel::init(spec);
  const auto& layers = j.at("layers");
  if (layers.size() != spec.layer_count()) throw std::runtime_error("layer count does not match spec");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& jw = layers[l].at("weight");
    Matrix& w = m.weights()[l];
    if (jw.at("rows") != w.rows() || jw.at("cols") != w.cols())
      throw std::runtime_error("layer " + std::to_string(l) + " weight shape does not match spec");
    const auto data = jw.at("data").get<std::vector<double>>();
    if (data.size() != static_cast<std::size_t>(w.size())) throw std::runtime_error("weight data size mismatch");
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = data[static_cast<std::size_t>(r * w.cols() + c)];
    const auto bias = layers[l].at("bias").get<std::vector<double>>();
    Matrix& b = m.biases()[l];
    if (bias.size() != static_cast<std::size_t>(b.size())) throw std::runtime_error("bias size mismatch");
    for (std::size_t k = 0; k < bias.size(); ++k) b(0, static_cast<Eigen::Index>(k)) = bias[k];
  }
  return m;
}

void save_model(const MlpModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_json(m) << "\n";
}

MlpModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return mlp_from_json(ss.str());
}

}  // namespace arw
