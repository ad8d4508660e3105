#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "mtlts/common.hpp"

namespace mtlts::ad {

using Mat = Eigen::MatrixXd;

struct Tensor {
  std::string name;
  Mat value;
};

// Named parameter tensors. Ids are creation order; creation order is part of
// a model's layout contract (checkpoints and gradient stores align by id).
class ParamStore {
 public:
  int add(const std::string& name, int rows, int cols);
  int id_of(const std::string& name) const;  // -1 if absent
  Tensor& operator[](int id) { return tensors_[static_cast<std::size_t>(id)]; }
  const Tensor& operator[](int id) const { return tensors_[static_cast<std::size_t>(id)]; }
  int size() const { return static_cast<int>(tensors_.size()); }
  std::size_t scalar_count() const;

 private:
  std::vector<Tensor> tensors_;
};

// Gradient buffers aligned with a ParamStore.
class GradStore {
 public:
  void init(const ParamStore& ps);
  void zero();
  void add(const GradStore& other);
  void scale(double s);
  double global_norm() const;
  Mat& operator[](int id) { return grads_[static_cast<std::size_t>(id)]; }
  const Mat& operator[](int id) const { return grads_[static_cast<std::size_t>(id)]; }
  int size() const { return static_cast<int>(grads_.size()); }

 private:
  std::vector<Mat> grads_;
};

void init_glorot(Mat& m, Rng& rng);
void init_zero(Mat& m);
void init_normal(Mat& m, Rng& rng, double stddev);

struct Var {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

// Define-by-run reverse-mode tape over dense double matrices. One tape per
// training example (or per fused graph); backward() accumulates parameter
// gradients into the bound GradStore.
class Tape {
 public:
  explicit Tape(const ParamStore* params = nullptr, GradStore* grads = nullptr);

  Var constant(Mat v);
  Var zeros(int rows, int cols = 1);
  Var param(int tensor_id);
  // column vector = mean of the given rows of a parameter matrix
  Var rows_mean(int tensor_id, const std::vector<int>& rows);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var cmul(Var a, Var b);
  Var matmul(Var a, Var b);
  Var scale(Var a, double s);
  Var scale_by(Var a, Var s);  // s is 1x1
  Var neg(Var a);
  Var sigmoid(Var a);
  Var tanh_v(Var a);
  Var dot(Var a, Var b);                       // 1x1
  Var concat(const std::vector<Var>& parts);   // vertical, column vectors
  Var mean_of(const std::vector<Var>& parts);  // elementwise mean
  Var sum_of(const std::vector<Var>& parts);   // elementwise sum
  Var log_softmax(Var a);                      // column vector
  Var pick(Var a, int index);                  // 1x1
  Var bce_with_logit(Var z, double y);         // 1x1, y in {0,1}

  const Mat& value(Var v) const;
  double scalar(Var v) const;
  void backward(Var loss);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    kConstant, kParam, kRowsMean, kAdd, kSub, kCMul, kMatMul, kScale,
    kScaleBy, kNeg, kSigmoid, kTanh, kDot, kConcat, kMean, kSum,
    kLogSoftmax, kPick, kBceLogit,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    std::vector<int> ins;    // concat / mean / sum
    std::vector<int> rows;   // rows_mean
    int param_id = -1;
    int pick_index = -1;
    double cscale = 0.0;     // scale factor / BCE target
    Mat val;
    Mat grad;
  };

  int push(Node n);
  Node& at(Var v);
  const Node& at(Var v) const;

  const ParamStore* params_;
  GradStore* grads_;
  std::vector<Node> nodes_;
};

}  // namespace mtlts::ad

namespace mtlts {
using ad::GradStore;
using ad::init_glorot;
using ad::init_normal;
using ad::init_zero;
using ad::Mat;
using ad::ParamStore;
using ad::Tape;
using ad::Tensor;
using ad::Var;
}  // namespace mtlts
