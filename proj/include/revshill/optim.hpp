#pragma once

#include "revshill/autodiff.hpp"

#include <unordered_map>

namespace revshill::ad {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // <= 0 disables global-norm clipping
  double weight_decay = 0.0;
};

class Adam {
 public:
  explicit Adam(AdamOptions opts = {}) : opts_(opts) {}

  // Applies one update from the accumulated gradients, then zeroes them.
  void step(ParameterStore& store);
  void set_lr(double lr) { opts_.lr = lr; }
  const AdamOptions& options() const { return opts_; }

 private:
  struct Moments {
    Matrix m, v;
  };
  AdamOptions opts_;
  std::unordered_map<const Parameter*, Moments> state_;
  long t_ = 0;
};

enum class TrainSignal { kContinue, kStop, kDiverged };

// Watches validation loss across epochs. After `patience` consecutive
// worsening evaluations training stops; it is reported as diverged when the
// loss has also climbed above the pre-training baseline, or is non-finite.
class DivergenceMonitor {
 public:
  DivergenceMonitor(int patience, double baseline) : patience_(patience), baseline_(baseline) {}
  TrainSignal observe(double val_loss);
  int worsening_streak() const { return streak_; }

 private:
  int patience_;
  double baseline_;
  int streak_ = 0;
  double last_ = 0.0;
  bool has_last_ = false;
};

}  // namespace revshill::ad
