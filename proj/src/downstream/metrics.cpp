#include "multissl/downstream/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <set>

#include "multissl/core/error.hpp"
#include "multissl/nn/layers.hpp"
#include "multissl/nn/optimizer.hpp"

namespace multissl::downstream {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> as_matrix(const Tensor& t) {
  if (t.rank() != 2) throw Error("expected a matrix");
  return {t.ptr(), t.dim(0), t.dim(1)};
}

Tensor from_matrix(const RowMatrix& m) {
  Tensor t({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
  Eigen::Map<RowMatrix>(t.ptr(), m.rows(), m.cols()) = m;
  return t;
}

RowMatrix normalized_rows(const Tensor& t) {
  RowMatrix m = as_matrix(t);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (n > 0.0) m.row(i) /= n;
  }
  return m;
}

struct Standardizer {
  Eigen::RowVectorXd mean, scale;

  explicit Standardizer(const RowMatrix& x) {
    mean = x.colwise().mean();
    scale = ((x.rowwise() - mean).array().square().colwise().mean()).sqrt();
    for (Eigen::Index j = 0; j < scale.size(); ++j) {
      if (scale[j] < 1e-12) scale[j] = 1.0;
    }
  }
  RowMatrix apply(const RowMatrix& x) const {
    return ((x.rowwise() - mean).array().rowwise() / scale.array()).matrix();
  }
};

}  // namespace

double retrieval_top1(const Tensor& queries, const Tensor& gallery) {
  if (queries.rank() != 2 || gallery.rank() != 2 || queries.dim(0) != gallery.dim(0) ||
      queries.dim(1) != gallery.dim(1)) {
    throw Error("retrieval needs query and gallery matrices of equal shape");
  }
  const int n = queries.dim(0);
  if (n < 2) throw Error("retrieval needs at least 2 rows");
  const RowMatrix sims = normalized_rows(queries) * normalized_rows(gallery).transpose();
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int j = 1; j < n; ++j) {
      if (sims(i, j) > sims(i, best)) best = j;
    }
    hits += best == i;
  }
  return static_cast<double>(hits) / n;
}

ConfusionCounts::ConfusionCounts(int classes)
    : num_classes(classes), tp(static_cast<size_t>(classes)), fp(static_cast<size_t>(classes)),
      fn(static_cast<size_t>(classes)) {
  if (classes < 1) throw Error("mIoU needs at least one class");
}

void ConfusionCounts::add(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw Error("label grid has " + std::to_string(truth.size()) + " cells but the prediction has " +
                std::to_string(predicted.size()));
  }
  for (size_t i = 0; i < truth.size(); ++i) {
    const int p = predicted[i], t = truth[i];
    if (p < 0 || p > num_classes || t < 0 || t > num_classes) throw Error("label out of range");
    if (p == t) {
      if (t < num_classes) ++tp[static_cast<size_t>(t)];
      continue;
    }
    if (p < num_classes) ++fp[static_cast<size_t>(p)];
    if (t < num_classes) ++fn[static_cast<size_t>(t)];
  }
}

double ConfusionCounts::mean_iou() const {
  double total = 0.0;
  int present = 0;
  for (size_t c = 0; c < tp.size(); ++c) {
    const int64_t denom = tp[c] + fp[c] + fn[c];
    if (denom == 0) continue;
    total += static_cast<double>(tp[c]) / static_cast<double>(denom);
    ++present;
  }
  return present == 0 ? 1.0 : total / present;
}

double mean_iou(std::span<const int> predicted, std::span<const int> truth, int num_classes) {
  ConfusionCounts c(num_classes);
  c.add(predicted, truth);
  return c.mean_iou();
}

double mean_squared_error(const Tensor& predicted, const Tensor& target) {
  if (predicted.shape != target.shape) throw Error("prediction and target shapes differ");
  if (target.empty()) throw Error("mean squared error of an empty tensor");
  double acc = 0.0;
  for (int64_t i = 0; i < target.size(); ++i) {
    const double e = predicted[i] - target[i];
    acc += e * e;
  }
  return acc / static_cast<double>(target.size());
}

double linear_probe(const Tensor& train_x, std::span<const int> train_y, const Tensor& test_x,
                    std::span<const int> test_y, int num_classes, const ProbeConfig& config) {
  if (train_x.rank() != 2 || test_x.rank() != 2 || train_x.dim(1) != test_x.dim(1)) {
    throw Error("probe features must be matrices of equal width");
  }
  if (static_cast<int>(train_y.size()) != train_x.dim(0) || static_cast<int>(test_y.size()) != test_x.dim(0)) {
    throw Error("probe needs one label per feature row");
  }
  if (test_y.empty()) throw Error("probe needs a non-empty test set");
  for (int y : train_y) {
    if (y < 0 || y >= num_classes) throw Error("probe label out of range");
  }
  if (std::set<int>(train_y.begin(), train_y.end()).size() < 2) {
    throw Error("linear probe needs at least 2 classes in the training set");
  }
  const Standardizer st(as_matrix(train_x));
  const nn::Var x = nn::Var::constant(from_matrix(st.apply(as_matrix(train_x))));
  const int d = train_x.dim(1);
  nn::Var w = nn::Var::parameter(Tensor({num_classes, d}, 0.0));
  nn::Var b = nn::Var::parameter(Tensor({num_classes}, 0.0));
  const nn::NamedParams params{{"weight", w}, {"bias", b}};
  nn::AdamConfig ac;
  ac.lr = config.lr;
  nn::Adam adam(ac);
  for (int step = 0; step < config.steps; ++step) {
    nn::zero_grads(params);
    nn::Var loss = nn::cross_entropy(nn::linear(x, w, b), train_y);
    if (config.weight_decay > 0.0) loss = nn::add(loss, nn::scale(nn::sum(nn::mul(w, w)), 0.5 * config.weight_decay));
    nn::backward(loss);
    adam.step(params);
  }
  nn::NoGradGuard guard;
  const Tensor logits = nn::linear(nn::Var::constant(from_matrix(st.apply(as_matrix(test_x)))), w, b).value();
  int hits = 0;
  for (int i = 0; i < logits.dim(0); ++i) {
    int best = 0;
    for (int c = 1; c < num_classes; ++c) {
      if (logits[i * num_classes + c] > logits[i * num_classes + best]) best = c;
    }
    hits += best == test_y[static_cast<size_t>(i)];
  }
  return static_cast<double>(hits) / logits.dim(0);
}

Tensor ridge_fit_predict(const Tensor& x, const Tensor& y, const Tensor& x_eval, double alpha) {
  if (x.dim(0) != y.dim(0)) throw Error("ridge regression needs one target row per input row");
  if (!(alpha > 0.0)) throw Error("ridge alpha must be positive");
  const Standardizer st(as_matrix(x));
  const RowMatrix xs = st.apply(as_matrix(x));
  const Eigen::RowVectorXd y_mean = as_matrix(y).colwise().mean();
  const RowMatrix yc = as_matrix(y).rowwise() - y_mean;
  RowMatrix gram = xs.transpose() * xs;
  gram.diagonal().array() += alpha;
  const RowMatrix coef = gram.ldlt().solve(xs.transpose() * yc);
  const RowMatrix pred = (st.apply(as_matrix(x_eval)) * coef).rowwise() + y_mean;
  return from_matrix(pred);
}

}  // namespace multissl::downstream
