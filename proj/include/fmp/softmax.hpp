#pragma once

#include <span>
#include <vector>

namespace fmp {

/// Weighted training set for a multinomial classifier. Rows of `x` are
/// features; identical rows may be folded into one with a larger weight.
struct Dataset {
  int dim = 0;
  std::vector<double> x;  // row-major, size() * dim
  std::vector<int> y;
  std::vector<double> weight;

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(x).subspan(i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim));
  }
  void add(std::span<const double> features, int label, double w = 1.0);
};

struct TrainParams {
  double learning_rate = 0.5;
  double l2 = 1e-4;
  int max_epochs = 3000;
  double tolerance = 1e-6;  // stop once the relative loss change drops below this
};

/// Multinomial logistic regression on standardized inputs:
///   z = W ((x - mean) / scale) + b,  p = softmax(z).
class SoftmaxRegression {
 public:
  SoftmaxRegression() = default;
  SoftmaxRegression(int classes, int dim);

  int classes() const { return classes_; }
  int dim() const { return dim_; }

  std::vector<double> log_probs(std::span<const double> x) const;
  void log_probs(std::span<const double> x, std::span<double> out) const;

  /// Weighted mean cross-entropy plus 0.5 * l2 * |W|^2, and its gradient with
  /// respect to (W row-major, then b).
  double loss(const Dataset& data, double l2, std::vector<double>* gradient = nullptr) const;

  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> p);

  /// Fits mean/scale from the data, then runs full-batch gradient descent
  /// from zero weights. Deterministic.
  static SoftmaxRegression train(const Dataset& data, int classes, const TrainParams& params, int* epochs_run = nullptr);

  std::vector<double> weights;  // classes x dim
  std::vector<double> bias;     // classes
  std::vector<double> mean;     // dim
  std::vector<double> scale;    // dim

 private:
  int classes_ = 0;
  int dim_ = 0;
};

/// Numerically stable log-softmax, in place.
void log_softmax(std::span<double> z);

}  // namespace fmp
