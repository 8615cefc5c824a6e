#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sgmi/autodiff/tensor.hpp"

namespace sgmi::train {

using ad::Tensor;

struct EvalConfig {
  std::size_t folds = 10;
  std::size_t repetitions = 7;  // max and min dropped when >= 3
  std::vector<double> c_grid = {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};
  std::size_t inner_folds = 3;  // C selection inside each training fold
  std::size_t max_iterations = 500;
  double tolerance = 1e-6;  // on the max-norm of the gradient
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

/// Fold id per sample. Each class's samples are shuffled and dealt
/// round-robin, continuing where the previous class stopped, so fold sizes
/// differ by at most one and class proportions are preserved.
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds, std::uint64_t seed);

/// Multinomial logistic regression with sklearn-style inverse regularization:
/// minimizes mean cross-entropy + |W|^2 / (2 C n), bias unpenalized, by
/// Nesterov-accelerated full-batch gradient descent with step 1/L.
class LogisticRegression {
 public:
  LogisticRegression(double c, std::size_t max_iterations, double tolerance);

  // Labels must lie in [0, num_classes).
  void fit(const Tensor& x, std::span<const int> labels, std::size_t num_classes);
  std::vector<int> predict(const Tensor& x) const;
  Tensor decision_function(const Tensor& x) const;  // n x K

  const Tensor& weights() const { return w_; }  // d x K
  const Tensor& bias() const { return b_; }     // 1 x K
  std::size_t iterations() const { return iterations_; }

 private:
  double c_;
  std::size_t max_iterations_;
  double tolerance_;
  Tensor w_, b_;
  std::size_t iterations_ = 0;
};

/// Centering plus one global scale (root-mean-square of the centered
/// entries), fitted on training rows. A single scalar keeps the pipeline
/// invariant to rotations of the embedding space.
struct Standardizer {
  std::vector<double> mean;
  double scale = 1.0;

  static Standardizer fit(const Tensor& x);
  Tensor apply(const Tensor& x) const;
};

double accuracy(std::span<const int> predicted, std::span<const int> truth);

struct EvalResult {
  double mean = 0.0;
  // Spread of the kept repetition means, or of the fold accuracies when only
  // one repetition is kept.
  double std = 0.0;
  std::vector<double> repetition_means;       // every repetition, in order
  std::vector<std::vector<double>> fold_accuracies;
  std::vector<double> chosen_c;               // per fold, all repetitions
};

/// Accuracy of one stratified k-fold pass with inner C selection.
std::vector<double> cross_validate(const Tensor& embeddings, std::span<const int> labels, const EvalConfig& config,
                                   std::uint64_t fold_seed, std::vector<double>* chosen_c = nullptr);

/// Stratified k-fold accuracy repeated with re-seeded folds; the reported
/// mean drops the best and worst repetition.
EvalResult evaluate_linear(const Tensor& embeddings, std::span<const int> labels, const EvalConfig& config);

}  // namespace sgmi::train
