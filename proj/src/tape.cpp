#include "mtlts/tape.hpp"

#include <cmath>

namespace mtlts::ad {

int ParamStore::add(const std::string& name, int rows, int cols) {
  if (id_of(name) >= 0) fail("duplicate parameter tensor: " + name);
  tensors_.push_back({name, Mat::Zero(rows, cols)});
  return static_cast<int>(tensors_.size()) - 1;
}

int ParamStore::id_of(const std::string& name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].name == name) return static_cast<int>(i);
  return -1;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
  return n;
}

void GradStore::init(const ParamStore& ps) {
  grads_.clear();
  grads_.reserve(static_cast<std::size_t>(ps.size()));
  for (int i = 0; i < ps.size(); ++i)
    grads_.push_back(Mat::Zero(ps[i].value.rows(), ps[i].value.cols()));
}

void GradStore::zero() {
  for (auto& g : grads_) g.setZero();
}

void GradStore::add(const GradStore& other) {
  if (other.grads_.size() != grads_.size()) fail("GradStore::add: size mismatch");
  for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += other.grads_[i];
}

void GradStore::scale(double s) {
  for (auto& g : grads_) g *= s;
}

double GradStore::global_norm() const {
  double sq = 0.0;
  for (const auto& g : grads_) sq += g.squaredNorm();
  return std::sqrt(sq);
}

void init_glorot(Mat& m, Rng& rng) {
  double r = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-r, r);
}

void init_zero(Mat& m) { m.setZero(); }

void init_normal(Mat& m, Rng& rng, double stddev) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.normal(0.0, stddev);
}

namespace {
double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}
double sigmoid_s(double z) { return 1.0 / (1.0 + std::exp(-z)); }
}  // namespace

Tape::Tape(const ParamStore* params, GradStore* grads)
    : params_(params), grads_(grads) {}

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tape::Node& Tape::at(Var v) {
  if (!v.valid() || v.idx >= static_cast<int>(nodes_.size())) fail("tape: invalid var");
  return nodes_[static_cast<std::size_t>(v.idx)];
}

const Tape::Node& Tape::at(Var v) const {
  if (!v.valid() || v.idx >= static_cast<int>(nodes_.size())) fail("tape: invalid var");
  return nodes_[static_cast<std::size_t>(v.idx)];
}

Var Tape::constant(Mat v) {
  Node n{};
  n.op = Op::kConstant;
  n.val = std::move(v);
  return {push(std::move(n))};
}

Var Tape::zeros(int rows, int cols) { return constant(Mat::Zero(rows, cols)); }

Var Tape::param(int tensor_id) {
  if (!params_) fail("tape: no parameter store bound");
  Node n{};
  n.op = Op::kParam;
  n.param_id = tensor_id;
  n.val = (*params_)[tensor_id].value;
  return {push(std::move(n))};
}

Var Tape::rows_mean(int tensor_id, const std::vector<int>& rows) {
  if (!params_) fail("tape: no parameter store bound");
  if (rows.empty()) fail("rows_mean: empty row set");
  const Mat& table = (*params_)[tensor_id].value;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(table.cols());
  for (int r : rows) {
    if (r < 0 || r >= table.rows()) fail("rows_mean: row out of range");
    acc += table.row(r).transpose();
  }
  acc /= static_cast<double>(rows.size());
  Node n{};
  n.op = Op::kRowsMean;
  n.param_id = tensor_id;
  n.rows = rows;
  n.val = acc;
  return {push(std::move(n))};
}

Var Tape::add(Var a, Var b) {
  Node n{};
  n.op = Op::kAdd;
  n.a = a.idx;
  n.b = b.idx;
  n.val = at(a).val + at(b).val;
  return {push(std::move(n))};
}

Var Tape::sub(Var a, Var b) {
  Node n{};
  n.op = Op::kSub;
  n.a = a.idx;
  n.b = b.idx;
  n.val = at(a).val - at(b).val;
  return {push(std::move(n))};
}

Var Tape::cmul(Var a, Var b) {
  Node n{};
  n.op = Op::kCMul;
  n.a = a.idx;
  n.b = b.idx;
  n.val = at(a).val.cwiseProduct(at(b).val);
  return {push(std::move(n))};
}

Var Tape::matmul(Var a, Var b) {
  Node n{};
  n.op = Op::kMatMul;
  n.a = a.idx;
  n.b = b.idx;
  n.val = at(a).val * at(b).val;
  return {push(std::move(n))};
}

Var Tape::scale(Var a, double s) {
  Node n{};
  n.op = Op::kScale;
  n.a = a.idx;
  n.cscale = s;
  n.val = at(a).val * s;
  return {push(std::move(n))};
}

Var Tape::scale_by(Var a, Var s) {
  if (at(s).val.size() != 1) fail("scale_by: scalar var must be 1x1");
  Node n{};
  n.op = Op::kScaleBy;
  n.a = a.idx;
  n.b = s.idx;
  n.val = at(a).val * at(s).val(0, 0);
  return {push(std::move(n))};
}

Var Tape::neg(Var a) { return scale(a, -1.0); }

Var Tape::sigmoid(Var a) {
  Node n{};
  n.op = Op::kSigmoid;
  n.a = a.idx;
  n.val = at(a).val.unaryExpr([](double z) { return sigmoid_s(z); });
  return {push(std::move(n))};
}

Var Tape::tanh_v(Var a) {
  Node n{};
  n.op = Op::kTanh;
  n.a = a.idx;
  n.val = at(a).val.array().tanh().matrix();
  return {push(std::move(n))};
}

Var Tape::dot(Var a, Var b) {
  if (at(a).val.size() != at(b).val.size()) fail("dot: size mismatch");
  Node n{};
  n.op = Op::kDot;
  n.a = a.idx;
  n.b = b.idx;
  n.val = Mat::Constant(1, 1, at(a).val.cwiseProduct(at(b).val).sum());
  return {push(std::move(n))};
}

Var Tape::concat(const std::vector<Var>& parts) {
  if (parts.empty()) fail("concat: no parts");
  Eigen::Index rows = 0;
  for (Var p : parts) {
    if (at(p).val.cols() != 1) fail("concat: expects column vectors");
    rows += at(p).val.rows();
  }
  Mat out(rows, 1);
  Eigen::Index off = 0;
  Node n{};
  n.op = Op::kConcat;
  for (Var p : parts) {
    out.block(off, 0, at(p).val.rows(), 1) = at(p).val;
    off += at(p).val.rows();
    n.ins.push_back(p.idx);
  }
  n.val = std::move(out);
  return {push(std::move(n))};
}

Var Tape::mean_of(const std::vector<Var>& parts) {
  if (parts.empty()) fail("mean_of: no parts");
  Mat acc = at(parts[0]).val;
  Node n{};
  n.op = Op::kMean;
  n.ins.push_back(parts[0].idx);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    acc += at(parts[i]).val;
    n.ins.push_back(parts[i].idx);
  }
  n.val = acc / static_cast<double>(parts.size());
  return {push(std::move(n))};
}

Var Tape::sum_of(const std::vector<Var>& parts) {
  if (parts.empty()) fail("sum_of: no parts");
  Mat acc = at(parts[0]).val;
  Node n{};
  n.op = Op::kSum;
  n.ins.push_back(parts[0].idx);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    acc += at(parts[i]).val;
    n.ins.push_back(parts[i].idx);
  }
  n.val = std::move(acc);
  return {push(std::move(n))};
}

Var Tape::log_softmax(Var a) {
  if (at(a).val.cols() != 1) fail("log_softmax: expects a column vector");
  const Mat& z = at(a).val;
  double zmax = z.maxCoeff();
  double lse = std::log((z.array() - zmax).exp().sum()) + zmax;
  Node n{};
  n.op = Op::kLogSoftmax;
  n.a = a.idx;
  n.val = z.array() - lse;
  return {push(std::move(n))};
}

Var Tape::pick(Var a, int index) {
  if (index < 0 || index >= at(a).val.rows()) fail("pick: index out of range");
  Node n{};
  n.op = Op::kPick;
  n.a = a.idx;
  n.pick_index = index;
  n.val = Mat::Constant(1, 1, at(a).val(index, 0));
  return {push(std::move(n))};
}

Var Tape::bce_with_logit(Var z, double y) {
  if (at(z).val.size() != 1) fail("bce_with_logit: logit must be 1x1");
  double zz = at(z).val(0, 0);
  Node n{};
  n.op = Op::kBceLogit;
  n.a = z.idx;
  n.cscale = y;
  n.val = Mat::Constant(1, 1, softplus(zz) - y * zz);
  return {push(std::move(n))};
}

const Mat& Tape::value(Var v) const { return at(v).val; }

double Tape::scalar(Var v) const {
  if (at(v).val.size() != 1) fail("scalar: var is not 1x1");
  return at(v).val(0, 0);
}

void Tape::backward(Var loss) {
  if (at(loss).val.size() != 1) fail("backward: loss must be 1x1");
  for (auto& n : nodes_) n.grad = Mat::Zero(n.val.rows(), n.val.cols());
  at(loss).grad(0, 0) = 1.0;

  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    const Mat& g = n.grad;
    switch (n.op) {
      case Op::kConstant:
        break;
      case Op::kParam:
        if (grads_) (*grads_)[n.param_id] += g;
        break;
      case Op::kRowsMean: {
        if (grads_) {
          Mat& tg = (*grads_)[n.param_id];
          double inv = 1.0 / static_cast<double>(n.rows.size());
          for (int r : n.rows) tg.row(r) += inv * g.transpose();
        }
        break;
      }
      case Op::kAdd:
        nodes_[static_cast<std::size_t>(n.a)].grad += g;
        nodes_[static_cast<std::size_t>(n.b)].grad += g;
        break;
      case Op::kSub:
        nodes_[static_cast<std::size_t>(n.a)].grad += g;
        nodes_[static_cast<std::size_t>(n.b)].grad -= g;
        break;
      case Op::kCMul:
        nodes_[static_cast<std::size_t>(n.a)].grad +=
            g.cwiseProduct(nodes_[static_cast<std::size_t>(n.b)].val);
        nodes_[static_cast<std::size_t>(n.b)].grad +=
            g.cwiseProduct(nodes_[static_cast<std::size_t>(n.a)].val);
        break;
      case Op::kMatMul:
        nodes_[static_cast<std::size_t>(n.a)].grad +=
            g * nodes_[static_cast<std::size_t>(n.b)].val.transpose();
        nodes_[static_cast<std::size_t>(n.b)].grad +=
            nodes_[static_cast<std::size_t>(n.a)].val.transpose() * g;
        break;
      case Op::kScale:
        nodes_[static_cast<std::size_t>(n.a)].grad += n.cscale * g;
        break;
      case Op::kNeg:
        nodes_[static_cast<std::size_t>(n.a)].grad -= g;
        break;
      case Op::kScaleBy: {
        double s = nodes_[static_cast<std::size_t>(n.b)].val(0, 0);
        nodes_[static_cast<std::size_t>(n.a)].grad += s * g;
        nodes_[static_cast<std::size_t>(n.b)].grad(0, 0) +=
            g.cwiseProduct(nodes_[static_cast<std::size_t>(n.a)].val).sum();
        break;
      }
      case Op::kSigmoid:
        nodes_[static_cast<std::size_t>(n.a)].grad +=
            g.cwiseProduct(n.val.cwiseProduct(Mat::Ones(n.val.rows(), n.val.cols()) - n.val));
        break;
      case Op::kTanh:
        nodes_[static_cast<std::size_t>(n.a)].grad +=
            g.cwiseProduct((1.0 - n.val.array().square()).matrix());
        break;
      case Op::kDot:
        nodes_[static_cast<std::size_t>(n.a)].grad +=
            g(0, 0) * nodes_[static_cast<std::size_t>(n.b)].val;
        nodes_[static_cast<std::size_t>(n.b)].grad +=
            g(0, 0) * nodes_[static_cast<std::size_t>(n.a)].val;
        break;
      case Op::kConcat: {
        Eigen::Index off = 0;
        for (int in : n.ins) {
          Node& src = nodes_[static_cast<std::size_t>(in)];
          src.grad += g.block(off, 0, src.val.rows(), 1);
          off += src.val.rows();
        }
        break;
      }
      case Op::kMean: {
        double inv = 1.0 / static_cast<double>(n.ins.size());
        for (int in : n.ins) nodes_[static_cast<std::size_t>(in)].grad += inv * g;
        break;
      }
      case Op::kSum:
        for (int in : n.ins) nodes_[static_cast<std::size_t>(in)].grad += g;
        break;
      case Op::kLogSoftmax: {
        double gsum = g.sum();
        Mat soft = n.val.array().exp();
        nodes_[static_cast<std::size_t>(n.a)].grad += g - gsum * soft;
        break;
      }
      case Op::kPick:
        nodes_[static_cast<std::size_t>(n.a)].grad(n.pick_index, 0) += g(0, 0);
        break;
      case Op::kBceLogit: {
        double z = nodes_[static_cast<std::size_t>(n.a)].val(0, 0);
        nodes_[static_cast<std::size_t>(n.a)].grad(0, 0) +=
            g(0, 0) * (sigmoid_s(z) - n.cscale);
        break;
      }
    }
  }
}

}  // namespace mtlts::ad
