#include "gnas/supernet.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace gnas {

namespace {

constexpr double kMomentum = 0.9;
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr char kMagic[4] = {'G', 'N', 'A', 'S'};

void fill_uniform(Eigen::Ref<Eigen::MatrixXd> m, double bound, Rng& rng) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      m(r, c) = bound * (2.0 * rng.uniform01() - 1.0);
}

const OperationChoice& choice_at(const SearchSpace& space, int layer, int op) {
  return space.layers[static_cast<std::size_t>(layer)]
      .choices[static_cast<std::size_t>(op)];
}

struct ForwardTrace {
  // per layer: pre-activation z and hidden activation a (empty for identity),
  // plus the running feature map entering each layer
  std::vector<Eigen::MatrixXd> inputs;   // L+1 entries; inputs[L] feeds classifier
  std::vector<Eigen::MatrixXd> pre_act;  // L entries
  std::vector<Eigen::MatrixXd> hidden;   // L entries
  Eigen::MatrixXd logits;
  double loss = 0.0;
  double accuracy = 0.0;
};

ForwardTrace run_forward(const SearchSpace& space, const SupernetWeights& weights,
                         const Path& path, const Batch& batch, bool keep_trace) {
  validate_path(space, path);
  if (batch.empty()) throw ValidationError("forward pass needs a non-empty batch");
  if (batch.x.rows() != space.input_dim())
    throw ValidationError("batch feature dim " + std::to_string(batch.x.rows()) +
                          " does not match space input dim " +
                          std::to_string(space.input_dim()));
  for (int label : batch.y)
    if (label < 0 || label >= weights.num_classes)
      throw ValidationError("label out of range for classifier");

  ForwardTrace trace;
  const int L = space.num_layers();
  if (keep_trace) {
    trace.inputs.resize(static_cast<std::size_t>(L) + 1);
    trace.pre_act.resize(static_cast<std::size_t>(L));
    trace.hidden.resize(static_cast<std::size_t>(L));
  }

  Eigen::MatrixXd h = batch.x;
  for (int l = 0; l < L; ++l) {
    if (keep_trace) trace.inputs[static_cast<std::size_t>(l)] = h;
    const int op = path.ops[static_cast<std::size_t>(l)];
    if (choice_at(space, l, op).kind == OpKind::identity) continue;
    const BlockParams& block =
        weights.params.blocks[static_cast<std::size_t>(l)][static_cast<std::size_t>(op)];
    Eigen::MatrixXd z = (block.w_expand * h).colwise() + block.b_expand;
    Eigen::MatrixXd a = z.cwiseMax(0.0);
    h = (block.w_project * a).colwise() + block.b_project;
    if (keep_trace) {
      trace.pre_act[static_cast<std::size_t>(l)] = std::move(z);
      trace.hidden[static_cast<std::size_t>(l)] = std::move(a);
    }
  }
  if (keep_trace) trace.inputs[static_cast<std::size_t>(L)] = h;

  trace.logits = (weights.params.classifier_w * h).colwise() + weights.params.classifier_b;

  const int B = batch.size();
  double loss = 0.0;
  int correct = 0;
  for (int b = 0; b < B; ++b) {
    const auto col = trace.logits.col(b);
    const double max_logit = col.maxCoeff();
    const double lse = max_logit + std::log((col.array() - max_logit).exp().sum());
    loss += lse - col(batch.y[static_cast<std::size_t>(b)]);
    Eigen::Index argmax = 0;
    col.maxCoeff(&argmax);
    if (static_cast<int>(argmax) == batch.y[static_cast<std::size_t>(b)]) ++correct;
  }
  trace.loss = loss / B;
  trace.accuracy = static_cast<double>(correct) / B;
  if (!std::isfinite(trace.loss))
    throw RuntimeAbort("non-finite loss on path " + path_to_string(path));
  return trace;
}

void write_bytes(std::ostream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  write_bytes(out, b, 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  write_bytes(out, b, 8);
}

void write_f64(std::ostream& out, double d) {
  write_u64(out, std::bit_cast<std::uint64_t>(d));
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw ValidationError("truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw ValidationError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

void write_tensor(std::ostream& out, const Eigen::Ref<const Eigen::MatrixXd>& m) {
  write_u32(out, static_cast<std::uint32_t>(m.rows()));
  write_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) write_f64(out, m(r, c));
}

Eigen::MatrixXd read_tensor(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  const auto file_rows = static_cast<Eigen::Index>(read_u32(in));
  const auto file_cols = static_cast<Eigen::Index>(read_u32(in));
  if (file_rows != rows || file_cols != cols)
    throw ValidationError("checkpoint tensor shape mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double v = read_f64(in);
      if (!std::isfinite(v)) throw ValidationError("non-finite value in checkpoint");
      m(r, c) = v;
    }
  return m;
}

template <typename Set, typename Visit>
void visit_param_tensors(const SearchSpace& space, Set&& set, Visit&& visit) {
  for (int l = 0; l < space.num_layers(); ++l)
    for (int c = 0; c < space.num_choices(l); ++c) {
      if (choice_at(space, l, c).kind == OpKind::identity) continue;
      auto& block = set.blocks[static_cast<std::size_t>(l)][static_cast<std::size_t>(c)];
      visit(block.w_expand);
      visit(block.b_expand);
      visit(block.w_project);
      visit(block.b_project);
    }
  visit(set.classifier_w);
  visit(set.classifier_b);
}

}  // namespace

int block_hidden_dim(const LayerSpec& layer, const OperationChoice& choice) {
  return std::max(1, static_cast<int>(std::lround(choice.width_factor * layer.output_dim)));
}

SupernetWeights init_supernet(const SearchSpace& space, int num_classes, Rng& rng) {
  space.validate();
  if (num_classes < 2) throw ValidationError("classifier needs at least two classes");
  Rng init_rng = rng.substream("supernet-init");

  SupernetWeights w;
  w.num_classes = num_classes;
  const int L = space.num_layers();
  w.params.blocks.resize(static_cast<std::size_t>(L));
  w.momentum.blocks.resize(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    const LayerSpec& layer = space.layers[static_cast<std::size_t>(l)];
    auto& params = w.params.blocks[static_cast<std::size_t>(l)];
    auto& momentum = w.momentum.blocks[static_cast<std::size_t>(l)];
    params.resize(layer.choices.size());
    momentum.resize(layer.choices.size());
    for (std::size_t c = 0; c < layer.choices.size(); ++c) {
      const OperationChoice& choice = layer.choices[c];
      if (choice.kind == OpKind::identity) continue;
      const int hidden = block_hidden_dim(layer, choice);
      BlockParams& block = params[c];
      block.w_expand.resize(hidden, layer.input_dim);
      block.b_expand = Eigen::VectorXd::Zero(hidden);
      block.w_project.resize(layer.output_dim, hidden);
      block.b_project = Eigen::VectorXd::Zero(layer.output_dim);
      const double bound_in = 1.0 / std::sqrt(static_cast<double>(layer.input_dim));
      const double bound_hidden = 1.0 / std::sqrt(static_cast<double>(hidden));
      fill_uniform(block.w_expand, bound_in, init_rng);
      fill_uniform(block.b_expand, bound_in, init_rng);
      fill_uniform(block.w_project, bound_hidden, init_rng);
      fill_uniform(block.b_project, bound_hidden, init_rng);
      BlockParams& mom = momentum[c];
      mom.w_expand = Eigen::MatrixXd::Zero(hidden, layer.input_dim);
      mom.b_expand = Eigen::VectorXd::Zero(hidden);
      mom.w_project = Eigen::MatrixXd::Zero(layer.output_dim, hidden);
      mom.b_project = Eigen::VectorXd::Zero(layer.output_dim);
    }
  }
  const int out_dim = space.output_dim();
  const double bound_out = 1.0 / std::sqrt(static_cast<double>(out_dim));
  w.params.classifier_w.resize(num_classes, out_dim);
  w.params.classifier_b = Eigen::VectorXd::Zero(num_classes);
  fill_uniform(w.params.classifier_w, bound_out, init_rng);
  fill_uniform(w.params.classifier_b, bound_out, init_rng);
  w.momentum.classifier_w = Eigen::MatrixXd::Zero(num_classes, out_dim);
  w.momentum.classifier_b = Eigen::VectorXd::Zero(num_classes);
  return w;
}

EvaluationRecord forward_loss(const SearchSpace& space, const SupernetWeights& weights,
                              const Path& path, const Batch& batch) {
  const ForwardTrace trace = run_forward(space, weights, path, batch, false);
  return EvaluationRecord{path, trace.loss, trace.accuracy, batch.size()};
}

PathGradient path_gradient(const SearchSpace& space, const SupernetWeights& weights,
                           const Path& path, const Batch& batch) {
  const ForwardTrace trace = run_forward(space, weights, path, batch, true);
  const int L = space.num_layers();
  const int B = batch.size();

  PathGradient grad;
  grad.loss = trace.loss;
  grad.block_w_expand.resize(static_cast<std::size_t>(L));
  grad.block_b_expand.resize(static_cast<std::size_t>(L));
  grad.block_w_project.resize(static_cast<std::size_t>(L));
  grad.block_b_project.resize(static_cast<std::size_t>(L));

  // d(mean CE)/d(logits) = (softmax - onehot) / B
  Eigen::MatrixXd dlogits = trace.logits;
  for (int b = 0; b < B; ++b) {
    auto col = dlogits.col(b);
    const double max_logit = col.maxCoeff();
    Eigen::VectorXd p = (col.array() - max_logit).exp();
    p /= p.sum();
    col = p;
    col(batch.y[static_cast<std::size_t>(b)]) -= 1.0;
  }
  dlogits /= static_cast<double>(B);

  grad.classifier_w = dlogits * trace.inputs[static_cast<std::size_t>(L)].transpose();
  grad.classifier_b = dlogits.rowwise().sum();
  Eigen::MatrixXd dh = weights.params.classifier_w.transpose() * dlogits;

  for (int l = L - 1; l >= 0; --l) {
    const int op = path.ops[static_cast<std::size_t>(l)];
    if (choice_at(space, l, op).kind == OpKind::identity) continue;
    const BlockParams& block =
        weights.params.blocks[static_cast<std::size_t>(l)][static_cast<std::size_t>(op)];
    const Eigen::MatrixXd& a = trace.hidden[static_cast<std::size_t>(l)];
    const Eigen::MatrixXd& z = trace.pre_act[static_cast<std::size_t>(l)];
    grad.block_w_project[static_cast<std::size_t>(l)] = dh * a.transpose();
    grad.block_b_project[static_cast<std::size_t>(l)] = dh.rowwise().sum();
    Eigen::MatrixXd da = block.w_project.transpose() * dh;
    Eigen::MatrixXd dz =
        da.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
    grad.block_w_expand[static_cast<std::size_t>(l)] =
        dz * trace.inputs[static_cast<std::size_t>(l)].transpose();
    grad.block_b_expand[static_cast<std::size_t>(l)] = dz.rowwise().sum();
    dh = block.w_expand.transpose() * dz;
  }
  return grad;
}

namespace {

template <typename W, typename V, typename G>
void nesterov_update(W& w, V& v, const G& g, double lr) {
  v = kMomentum * v - lr * g;
  w += kMomentum * v - lr * g;
}

}  // namespace

double train_step(const SearchSpace& space, SupernetWeights& weights, const Path& path,
                  const Batch& batch, double lr) {
  if (lr < 0.0) throw ValidationError("learning rate must be non-negative");
  PathGradient grad = path_gradient(space, weights, path, batch);

  auto check = [&](const auto& g) {
    if (!g.allFinite())
      throw RuntimeAbort("non-finite gradient on path " + path_to_string(path));
  };
  for (int l = 0; l < space.num_layers(); ++l) {
    const int op = path.ops[static_cast<std::size_t>(l)];
    if (choice_at(space, l, op).kind == OpKind::identity) continue;
    check(grad.block_w_expand[static_cast<std::size_t>(l)]);
    check(grad.block_b_expand[static_cast<std::size_t>(l)]);
    check(grad.block_w_project[static_cast<std::size_t>(l)]);
    check(grad.block_b_project[static_cast<std::size_t>(l)]);
  }
  check(grad.classifier_w);
  check(grad.classifier_b);

  for (int l = 0; l < space.num_layers(); ++l) {
    const int op = path.ops[static_cast<std::size_t>(l)];
    if (choice_at(space, l, op).kind == OpKind::identity) continue;
    BlockParams& p =
        weights.params.blocks[static_cast<std::size_t>(l)][static_cast<std::size_t>(op)];
    BlockParams& m =
        weights.momentum.blocks[static_cast<std::size_t>(l)][static_cast<std::size_t>(op)];
    nesterov_update(p.w_expand, m.w_expand, grad.block_w_expand[static_cast<std::size_t>(l)], lr);
    nesterov_update(p.b_expand, m.b_expand, grad.block_b_expand[static_cast<std::size_t>(l)], lr);
    nesterov_update(p.w_project, m.w_project, grad.block_w_project[static_cast<std::size_t>(l)], lr);
    nesterov_update(p.b_project, m.b_project, grad.block_b_project[static_cast<std::size_t>(l)], lr);
  }
  nesterov_update(weights.params.classifier_w, weights.momentum.classifier_w,
                  grad.classifier_w, lr);
  nesterov_update(weights.params.classifier_b, weights.momentum.classifier_b,
                  grad.classifier_b, lr);
  return grad.loss;
}

double cosine_lr(long long step, long long total_steps, double lr0) {
  if (total_steps <= 0) throw ValidationError("total_steps must be positive");
  if (step < 0 || step > total_steps) throw ValidationError("step outside schedule range");
  return lr0 * (1.0 + std::cos(M_PI * static_cast<double>(step) /
                               static_cast<double>(total_steps))) / 2.0;
}

void save_checkpoint(const std::string& file, const SearchSpace& space,
                     const SupernetWeights& weights) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint: " + file);
  write_bytes(out, kMagic, 4);
  write_u32(out, kCheckpointVersion);
  write_u64(out, space_hash(space));
  write_u32(out, static_cast<std::uint32_t>(weights.num_classes));
  visit_param_tensors(space, weights.params,
                      [&](const auto& t) { write_tensor(out, t); });
  visit_param_tensors(space, weights.momentum,
                      [&](const auto& t) { write_tensor(out, t); });
  if (!out) throw ValidationError("short write on checkpoint: " + file);
}

SupernetWeights load_checkpoint(const std::string& file, const SearchSpace& space) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint: " + file);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw ValidationError("bad checkpoint magic in " + file);
  if (read_u32(in) != kCheckpointVersion)
    throw ValidationError("unsupported checkpoint version in " + file);
  if (read_u64(in) != space_hash(space))
    throw ValidationError("checkpoint was trained on a different search space: " + file);
  const int num_classes = static_cast<int>(read_u32(in));

  Rng dummy(0);
  SupernetWeights weights = init_supernet(space, num_classes, dummy);
  visit_param_tensors(space, weights.params, [&](auto& t) {
    t = read_tensor(in, t.rows(), t.cols());
  });
  visit_param_tensors(space, weights.momentum, [&](auto& t) {
    t = read_tensor(in, t.rows(), t.cols());
  });
  in.peek();
  if (!in.eof()) throw ValidationError("trailing bytes in checkpoint: " + file);
  return weights;
}

}  // namespace gnas
