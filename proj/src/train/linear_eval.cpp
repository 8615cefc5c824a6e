#include "sgmi/train/linear_eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "sgmi/core/error.hpp"
#include "sgmi/core/log.hpp"
#include "sgmi/core/rng.hpp"

namespace sgmi::train {

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;

ConstMap view(const Tensor& t) { return ConstMap(t.data().data(), t.rows(), t.cols()); }

Tensor to_tensor(const Matrix& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  MutMap(t.data().data(), m.rows(), m.cols()) = m;
  return t;
}

// Row-wise softmax in place.
void softmax_rows(Matrix& z) {
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    z.row(r) = (z.row(r).array() - m).exp();
    z.row(r) /= z.row(r).sum();
  }
}

Tensor select_rows(const Tensor& x, std::span<const std::size_t> rows) {
  Tensor out({rows.size(), x.cols()});
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(x.row(rows[i]).begin(), x.cols(), out.row(i).begin());
  return out;
}

template <typename T>
std::vector<T> select(std::span<const T> values, std::span<const std::size_t> rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(values[r]);
  return out;
}

// Maps arbitrary class ids onto 0..K-1 in increasing order.
std::vector<int> dense_labels(std::span<const int> labels, std::size_t& num_classes) {
  std::map<int, int> ids;
  for (int l : labels) ids.emplace(l, 0);
  int next = 0;
  for (auto& [label, id] : ids) id = next++;
  num_classes = ids.size();
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) out.push_back(ids[l]);
  return out;
}

std::vector<std::size_t> fold_members(std::span<const std::size_t> fold_of, std::size_t fold, bool inside) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if ((fold_of[i] == fold) == inside) out.push_back(i);
  return out;
}

double population_std(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

void EvalConfig::validate() const {
  if (folds < 2) throw ConfigError("eval: folds must be >= 2, got " + std::to_string(folds));
  if (inner_folds < 2) throw ConfigError("eval: inner_folds must be >= 2, got " + std::to_string(inner_folds));
  if (repetitions < 1) throw ConfigError("eval: repetitions must be >= 1");
  if (c_grid.empty()) throw ConfigError("eval: C grid is empty");
  for (double c : c_grid)
    if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("eval: C values must be positive and finite");
  if (max_iterations < 1) throw ConfigError("eval: max_iterations must be >= 1");
  if (!(tolerance >= 0.0)) throw ConfigError("eval: tolerance must be >= 0");
}

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds, std::uint64_t seed) {
  if (folds == 0) throw ContractError("stratified_folds: folds must be positive");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> fold_of(labels.size());
  std::size_t next = 0;
  for (auto& [label, members] : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t i : members) fold_of[i] = next++ % folds;
  }
  return fold_of;
}

LogisticRegression::LogisticRegression(double c, std::size_t max_iterations, double tolerance)
    : c_(c), max_iterations_(max_iterations), tolerance_(tolerance) {
  if (!(c > 0.0)) throw ContractError("LogisticRegression: C must be positive");
}

void LogisticRegression::fit(const Tensor& x_in, std::span<const int> labels, std::size_t num_classes) {
  const auto n = static_cast<Eigen::Index>(x_in.rows());
  const auto d = static_cast<Eigen::Index>(x_in.cols());
  const auto k = static_cast<Eigen::Index>(num_classes);
  if (static_cast<std::size_t>(n) != labels.size() || n == 0) {
    throw DimensionError("LogisticRegression::fit: " + std::to_string(n) + " rows for " +
                         std::to_string(labels.size()) + " labels");
  }
  const ConstMap x = view(x_in);
  Matrix y = Matrix::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    if (l < 0 || l >= k) throw IndexError("LogisticRegression::fit: label " + std::to_string(l) + " out of range");
    y(i, l) = 1.0;
  }
  const double nd = static_cast<double>(n);
  const double reg = 1.0 / (c_ * nd);

  // Lipschitz constant: softmax curvature is at most 1/2 times the largest
  // eigenvalue of [X 1]^T [X 1] / n, plus the ridge term.
  Matrix xa(n, d + 1);
  xa.leftCols(d) = x;
  xa.col(d).setOnes();
  const Matrix gram = xa.transpose() * xa;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(d + 1);
  double lambda = 0.0;
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd next = gram * v;
    lambda = next.norm();
    if (lambda == 0.0) break;
    v = next / lambda;
  }
  const double lip = 0.5 * 1.05 * lambda / nd + reg;

  Matrix w = Matrix::Zero(d, k), w_prev = w;
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(k), b_prev = b;
  Matrix p(n, k);
  iterations_ = 0;
  for (std::size_t it = 1; it <= max_iterations_; ++it) {
    const double momentum = static_cast<double>(it - 1) / static_cast<double>(it + 2);
    const Matrix wy = w + momentum * (w - w_prev);
    const Eigen::RowVectorXd by = b + momentum * (b - b_prev);
    p.noalias() = x * wy;
    p.rowwise() += by;
    softmax_rows(p);
    p = (p - y) / nd;
    const Matrix gw = x.transpose() * p + reg * wy;
    const Eigen::RowVectorXd gb = p.colwise().sum();
    iterations_ = it;
    const double gmax = std::max(gw.cwiseAbs().maxCoeff(), gb.cwiseAbs().maxCoeff());
    w_prev = w;
    b_prev = b;
    w = wy - gw / lip;
    b = by - gb / lip;
    if (gmax < tolerance_) break;
  }
  w_ = to_tensor(w);
  b_ = to_tensor(b);
}

Tensor LogisticRegression::decision_function(const Tensor& x) const {
  if (w_.empty()) throw ContractError("LogisticRegression: predict before fit");
  if (x.cols() != w_.rows()) {
    throw DimensionError("LogisticRegression: input width " + std::to_string(x.cols()) + ", fitted " +
                         std::to_string(w_.rows()));
  }
  Matrix z = view(x) * view(w_);
  z.rowwise() += view(b_).row(0);
  return to_tensor(z);
}

std::vector<int> LogisticRegression::predict(const Tensor& x) const {
  const Tensor z = decision_function(x);
  std::vector<int> out(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto r = z.row(i);
    out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

Standardizer Standardizer::fit(const Tensor& x) {
  Standardizer s;
  const std::size_t n = x.rows(), d = x.cols();
  s.mean.assign(d, 0.0);
  if (n == 0) return s;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += x(i, j);
  for (double& m : s.mean) m /= static_cast<double>(n);
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) sq += (x(i, j) - s.mean[j]) * (x(i, j) - s.mean[j]);
  const double rms = std::sqrt(sq / static_cast<double>(n * std::max<std::size_t>(d, 1)));
  s.scale = rms > 0.0 ? rms : 1.0;
  return s;
}

Tensor Standardizer::apply(const Tensor& x) const {
  if (x.cols() != mean.size()) throw DimensionError("Standardizer: width mismatch");
  Tensor out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = (x(i, j) - mean[j]) / scale;
  return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw DimensionError("accuracy: length mismatch");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

namespace {

double fit_score(const Tensor& x_train, std::span<const int> y_train, const Tensor& x_test,
                 std::span<const int> y_test, std::size_t k, double c, const EvalConfig& config) {
  const Standardizer s = Standardizer::fit(x_train);
  LogisticRegression clf(c, config.max_iterations, config.tolerance);
  clf.fit(s.apply(x_train), y_train, k);
  return accuracy(clf.predict(s.apply(x_test)), y_test);
}

double select_c(const Tensor& x, std::span<const int> y, std::size_t k, const EvalConfig& config,
                std::uint64_t seed) {
  if (config.c_grid.size() == 1) return config.c_grid.front();
  const auto inner = stratified_folds(y, config.inner_folds, seed);
  double best_c = config.c_grid.front(), best = -1.0;
  for (double c : config.c_grid) {
    double total = 0.0;
    std::size_t used = 0;
    for (std::size_t f = 0; f < config.inner_folds; ++f) {
      const auto test = fold_members(inner, f, true);
      const auto train = fold_members(inner, f, false);
      if (test.empty() || train.empty()) continue;
      total += fit_score(select_rows(x, train), select<int>(y, train), select_rows(x, test), select<int>(y, test), k,
                         c, config);
      ++used;
    }
    const double score = used ? total / static_cast<double>(used) : 0.0;
    if (score > best) {
      best = score;
      best_c = c;
    }
  }
  return best_c;
}

}  // namespace

std::vector<double> cross_validate(const Tensor& embeddings, std::span<const int> labels_in, const EvalConfig& config,
                                   std::uint64_t fold_seed, std::vector<double>* chosen_c) {
  config.validate();
  if (embeddings.rows() != labels_in.size()) {
    throw DimensionError("evaluate_linear: " + std::to_string(embeddings.rows()) + " embeddings for " +
                         std::to_string(labels_in.size()) + " labels");
  }
  if (labels_in.size() < config.folds) {
    throw ContractError("evaluate_linear: " + std::to_string(labels_in.size()) + " samples for " +
                        std::to_string(config.folds) + " folds");
  }
  std::size_t k = 0;
  const std::vector<int> labels = dense_labels(labels_in, k);

  std::vector<std::size_t> fold_of = stratified_folds(labels, config.folds, fold_seed);
  // Round-robin dealing can only leave a class out of a training fold when
  // the class has a single sample; a fresh shuffle is tried before giving up.
  for (int attempt = 0;; ++attempt) {
    bool complete = true;
    for (std::size_t f = 0; f < config.folds && complete; ++f) {
      std::vector<bool> seen(k, false);
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (fold_of[i] != f) seen[static_cast<std::size_t>(labels[i])] = true;
      for (std::size_t c = 0; c < k; ++c) {
        if (!seen[c]) {
          log_warning("evaluate_linear: class " + std::to_string(c) + " absent from training fold " +
                      std::to_string(f) + "; re-stratifying");
          complete = false;
          break;
        }
      }
    }
    if (complete || attempt == 3) break;
    fold_of = stratified_folds(labels, config.folds, mix_seed(fold_seed, 100 + attempt));
  }

  std::vector<double> scores;
  for (std::size_t f = 0; f < config.folds; ++f) {
    const auto test = fold_members(fold_of, f, true);
    const auto train = fold_members(fold_of, f, false);
    const Tensor x_train = select_rows(embeddings, train);
    const auto y_train = select<int>(labels, train);
    const double c = select_c(x_train, y_train, k, config, mix_seed(fold_seed, 1000 + f));
    if (chosen_c) chosen_c->push_back(c);
    scores.push_back(fit_score(x_train, y_train, select_rows(embeddings, test), select<int>(labels, test), k, c,
                               config));
  }
  return scores;
}

EvalResult evaluate_linear(const Tensor& embeddings, std::span<const int> labels, const EvalConfig& config) {
  config.validate();
  if (!embeddings.all_finite()) throw NumericalError("evaluate_linear: embeddings contain non-finite values");
  EvalResult result;
  for (std::size_t r = 0; r < config.repetitions; ++r) {
    auto scores = cross_validate(embeddings, labels, config, mix_seed(config.seed, r), &result.chosen_c);
    result.repetition_means.push_back(std::accumulate(scores.begin(), scores.end(), 0.0) /
                                      static_cast<double>(scores.size()));
    result.fold_accuracies.push_back(std::move(scores));
  }
  std::vector<std::size_t> order(config.repetitions);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return result.repetition_means[a] < result.repetition_means[b];
  });
  std::vector<std::size_t> kept = order;
  if (kept.size() >= 3) kept = std::vector<std::size_t>(order.begin() + 1, order.end() - 1);
  std::vector<double> kept_means;
  for (std::size_t r : kept) kept_means.push_back(result.repetition_means[r]);
  result.mean = std::accumulate(kept_means.begin(), kept_means.end(), 0.0) / static_cast<double>(kept_means.size());
  result.std = kept.size() >= 2 ? population_std(kept_means) : population_std(result.fold_accuracies[kept.front()]);
  return result;
}

}  // namespace sgmi::train
