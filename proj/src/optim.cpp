#include "revshill/optim.hpp"

#include <cmath>

namespace revshill::ad {

void Adam::step(ParameterStore& store) {
  auto params = store.trainable();
  double scale = 1.0;
  if (opts_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const Parameter* p : params) sq += p->grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > opts_.clip_norm) scale = opts_.clip_norm / norm;
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (Parameter* p : params) {
    auto& st = state_[p];
    if (st.m.size() == 0) {
      st.m = Matrix::Zero(p->value.rows(), p->value.cols());
      st.v = Matrix::Zero(p->value.rows(), p->value.cols());
    }
    Matrix g = p->grad * scale;
    if (opts_.weight_decay > 0.0) g += opts_.weight_decay * p->value;
    st.m = opts_.beta1 * st.m + (1.0 - opts_.beta1) * g;
    st.v = opts_.beta2 * st.v + (1.0 - opts_.beta2) * g.cwiseProduct(g);
    p->value.array() -= opts_.lr * (st.m.array() / bc1) / ((st.v.array() / bc2).sqrt() + opts_.eps);
  }
  store.zero_grad();
}

TrainSignal DivergenceMonitor::observe(double val_loss) {
  if (!std::isfinite(val_loss)) return TrainSignal::kDiverged;
  if (has_last_ && val_loss > last_) {
    ++streak_;
  } else {
    streak_ = 0;
  }
  last_ = val_loss;
  has_last_ = true;
  if (streak_ < patience_) return TrainSignal::kContinue;
  return val_loss > baseline_ ? TrainSignal::kDiverged : TrainSignal::kStop;
}

}  // namespace revshill::ad
