#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gnas/evaluator.hpp"

namespace gnas {

/// Parameters of one affine_relu block: an expand/project pair with a ReLU in
/// between, x -> w_project * relu(w_expand * x + b_expand) + b_project. The
/// hidden width is round(width_factor * output_dim), so the width factor is a
/// real capacity knob while every choice keeps the layer's in/out dimensions.
/// Identity choices own no parameters (all four tensors empty).
struct BlockParams {
  Eigen::MatrixXd w_expand;   // hidden x in
  Eigen::VectorXd b_expand;   // hidden
  Eigen::MatrixXd w_project;  // out x hidden
  Eigen::VectorXd b_project;  // out

  bool empty() const { return w_expand.size() == 0; }
};

struct ParamSet {
  std::vector<std::vector<BlockParams>> blocks;  // [layer][choice]
  Eigen::MatrixXd classifier_w;                  // classes x out_dim
  Eigen::VectorXd classifier_b;                  // classes
};

/// Shared weights of the whole space plus SGD momentum buffers of identical
/// shape. Only the blocks along one path (plus the classifier) participate in
/// any forward or update.
struct SupernetWeights {
  ParamSet params;
  ParamSet momentum;
  int num_classes = 0;
};

int block_hidden_dim(const LayerSpec& layer, const OperationChoice& choice);

/// Fresh weights, uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]; momentum zero.
SupernetWeights init_supernet(const SearchSpace& space, int num_classes, Rng& rng);

/// Mean softmax cross-entropy of one path on one batch; touches only the
/// selected blocks and the classifier.
EvaluationRecord forward_loss(const SearchSpace& space, const SupernetWeights& weights,
                              const Path& path, const Batch& batch);

/// One SGD step with Nesterov momentum 0.9 on the path's parameters:
///   v <- mu*v - lr*g;  w <- w + mu*v - lr*g.
/// Everything off the path is left byte-identical, momentum buffers included.
/// Returns the batch loss. Throws RuntimeAbort on a non-finite gradient.
double train_step(const SearchSpace& space, SupernetWeights& weights, const Path& path,
                  const Batch& batch, double lr);

/// Cosine annealing: lr0 * (1 + cos(pi * step / total_steps)) / 2.
double cosine_lr(long long step, long long total_steps, double lr0);

/// Analytic gradient of the batch loss w.r.t. the path's parameters, flattened
/// in update order. Exposed for finite-difference verification.
struct PathGradient {
  std::vector<Eigen::MatrixXd> block_w_expand, block_w_project;
  std::vector<Eigen::VectorXd> block_b_expand, block_b_project;
  Eigen::MatrixXd classifier_w;
  Eigen::VectorXd classifier_b;
  double loss = 0.0;
};
PathGradient path_gradient(const SearchSpace& space, const SupernetWeights& weights,
                           const Path& path, const Batch& batch);

/// Binary checkpoint: "GNAS" magic, format version, space hash, then every
/// tensor as dimension-prefixed little-endian float64. Exact round trip.
void save_checkpoint(const std::string& file, const SearchSpace& space,
                     const SupernetWeights& weights);
SupernetWeights load_checkpoint(const std::string& file, const SearchSpace& space);

/// Trainable backend over the shared-weight toy supernet.
class SupernetEvaluator : public Evaluator {
 public:
  SupernetEvaluator(const SearchSpace& space, SupernetWeights weights)
      : space_(space), weights_(std::move(weights)) {}

  EvaluationRecord evaluate(const Path& path, const Batch& batch) const override {
    return forward_loss(space_, weights_, path, batch);
  }
  double train_on_batch(const Path& path, const Batch& batch, double lr) override {
    return train_step(space_, weights_, path, batch, lr);
  }
  bool trainable() const override { return true; }

  const SupernetWeights& weights() const { return weights_; }
  SupernetWeights& weights() { return weights_; }
  const SearchSpace& space() const { return space_; }

 private:
  const SearchSpace& space_;
  SupernetWeights weights_;
};

}  // namespace gnas
