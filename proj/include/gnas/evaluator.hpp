#pragma once

#include "gnas/dataset.hpp"
#include "gnas/search_space.hpp"

namespace gnas {

struct EvaluationRecord {
  Path path;
  double loss = 0.0;
  double accuracy = 0.0;  // in [0, 1]
  long long num_images = 0;
};

/// Common surface for path-quality backends. `evaluate` is read-only and safe
/// to call concurrently; `train_on_batch` is single-writer. Backends that hold
/// no trainable state implement `train_on_batch` as a no-op returning the
/// current loss, so the trainer and searcher run unmodified against either.
class Evaluator {
 public:
  virtual ~Evaluator() = default;

  virtual EvaluationRecord evaluate(const Path& path, const Batch& batch) const = 0;
  virtual double train_on_batch(const Path& path, const Batch& batch, double lr) = 0;
  virtual bool trainable() const = 0;
};

}  // namespace gnas
