#include "fmp/softmax.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fmp {

void Dataset::add(std::span<const double> features, int label, double w) {
  if (static_cast<int>(features.size()) != dim) throw std::invalid_argument("dataset row has the wrong dimension");
  x.insert(x.end(), features.begin(), features.end());
  y.push_back(label);
  weight.push_back(w);
}

void log_softmax(std::span<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  const double lse = m + std::log(s);
  for (double& v : z) v -= lse;
}

SoftmaxRegression::SoftmaxRegression(int classes, int dim)
    : weights(static_cast<std::size_t>(classes) * dim, 0.0),
      bias(static_cast<std::size_t>(classes), 0.0),
      mean(static_cast<std::size_t>(dim), 0.0),
      scale(static_cast<std::size_t>(dim), 1.0),
      classes_(classes),
      dim_(dim) {}

void SoftmaxRegression::log_probs(std::span<const double> x, std::span<double> out) const {
  if (static_cast<int>(x.size()) != dim_) throw std::invalid_argument("classifier input has the wrong dimension");
  for (int c = 0; c < classes_; ++c) {
    double z = bias[static_cast<std::size_t>(c)];
    const double* w = weights.data() + static_cast<std::size_t>(c) * dim_;
    for (int d = 0; d < dim_; ++d) {
      z += w[d] * (x[static_cast<std::size_t>(d)] - mean[static_cast<std::size_t>(d)]) / scale[static_cast<std::size_t>(d)];
    }
    out[static_cast<std::size_t>(c)] = z;
  }
  log_softmax(out.first(static_cast<std::size_t>(classes_)));
}

std::vector<double> SoftmaxRegression::log_probs(std::span<const double> x) const {
  std::vector<double> out(static_cast<std::size_t>(classes_));
  log_probs(x, out);
  return out;
}

double SoftmaxRegression::loss(const Dataset& data, double l2, std::vector<double>* gradient) const {
  const auto C = static_cast<std::size_t>(classes_);
  const auto D = static_cast<std::size_t>(dim_);
  if (gradient) gradient->assign(C * D + C, 0.0);
  double total_w = 0.0;
  double nll = 0.0;
  std::vector<double> lp(C);
  std::vector<double> xs(D);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double w = data.weight[i];
    if (w == 0.0) continue;
    const auto row = data.row(i);
    log_probs(row, lp);
    const auto yi = static_cast<std::size_t>(data.y[i]);
    nll -= w * lp[yi];
    total_w += w;
    if (!gradient) continue;
    for (std::size_t d = 0; d < D; ++d) xs[d] = (row[d] - mean[d]) / scale[d];
    for (std::size_t c = 0; c < C; ++c) {
      const double r = w * (std::exp(lp[c]) - (c == yi ? 1.0 : 0.0));
      double* g = gradient->data() + c * D;
      for (std::size_t d = 0; d < D; ++d) g[d] += r * xs[d];
      (*gradient)[C * D + c] += r;
    }
  }
  if (total_w <= 0.0) throw std::invalid_argument("loss over an empty dataset");
  double reg = 0.0;
  for (double v : weights) reg += v * v;
  if (gradient) {
    for (double& g : *gradient) g /= total_w;
    for (std::size_t k = 0; k < C * D; ++k) (*gradient)[k] += l2 * weights[k];
  }
  return nll / total_w + 0.5 * l2 * reg;
}

std::vector<double> SoftmaxRegression::parameters() const {
  std::vector<double> p(weights);
  p.insert(p.end(), bias.begin(), bias.end());
  return p;
}

void SoftmaxRegression::set_parameters(std::span<const double> p) {
  if (p.size() != weights.size() + bias.size()) throw std::invalid_argument("parameter vector has the wrong size");
  std::copy(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(weights.size()), weights.begin());
  std::copy(p.begin() + static_cast<std::ptrdiff_t>(weights.size()), p.end(), bias.begin());
}

SoftmaxRegression SoftmaxRegression::train(const Dataset& data, int classes, const TrainParams& params, int* epochs_run) {
  if (data.size() == 0) throw std::invalid_argument("cannot train on an empty dataset");
  SoftmaxRegression model(classes, data.dim);
  const auto D = static_cast<std::size_t>(data.dim);
  double total_w = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    total_w += data.weight[i];
    for (std::size_t d = 0; d < D; ++d) model.mean[d] += data.weight[i] * data.row(i)[d];
  }
  for (double& m : model.mean) m /= total_w;
  std::vector<double> var(D, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t d = 0; d < D; ++d) {
      const double c = data.row(i)[d] - model.mean[d];
      var[d] += data.weight[i] * c * c;
    }
  }
  for (std::size_t d = 0; d < D; ++d) {
    const double sd = std::sqrt(var[d] / total_w);
    model.scale[d] = sd > 1e-12 ? sd : 1.0;
  }

  std::vector<double> grad;
  std::vector<double> theta = model.parameters();
  double prev = model.loss(data, params.l2, &grad);
  int epoch = 0;
  double lr = params.learning_rate;
  while (epoch < params.max_epochs) {
    ++epoch;
    std::vector<double> next(theta);
    for (std::size_t k = 0; k < next.size(); ++k) next[k] -= lr * grad[k];
    model.set_parameters(next);
    std::vector<double> next_grad;
    const double cur = model.loss(data, params.l2, &next_grad);
    if (cur > prev) {
      // Overshoot: back off and retry from the previous point.
      model.set_parameters(theta);
      lr *= 0.5;
      if (lr < 1e-12) break;
      continue;
    }
    theta = std::move(next);
    grad = std::move(next_grad);
    const double rel = std::abs(prev - cur) / std::max(std::abs(prev), 1e-300);
    prev = cur;
    if (rel < params.tolerance) break;
  }
  if (epochs_run) *epochs_run = epoch;
  return model;
}

}  // namespace fmp
