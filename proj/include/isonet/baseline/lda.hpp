// lda.hpp -- linear discriminant analysis with pooled within-class covariance
// and diagonal shrinkage.
//
// Fit: mu_c per class, Sigma = pooled scatter / (N - C), then
// (1-gamma) Sigma + gamma diag(Sigma). Prediction scores are the usual
// linear discriminants  x . w_c - mu_c . w_c / 2 + log pi_c  with
// w_c = Sigma^-1 mu_c  solved by Cholesky. If the shrunken covariance is
// still not positive definite (zero-variance features), a shrinkage-scaled
// ridge is added so the fit degrades to the nearest-class-mean rule.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "isonet/common.hpp"

namespace isonet {

struct LdaModel {
  int n_classes = 0;
  std::vector<int> bins;  // dataset bin index of each feature column (informational)
  Eigen::MatrixXd means;     // C x K
  Eigen::MatrixXd weights;   // C x K
  Eigen::VectorXd bias;      // C
  std::vector<double> priors;
  double shrinkage = 0.0;
};

inline LdaModel lda_fit(const Eigen::MatrixXd& features, std::span<const int> labels,
                        int n_classes, double shrinkage, std::vector<int> bins = {}) {
  const auto n = features.rows();
  const auto k = features.cols();
  if (n != static_cast<Eigen::Index>(labels.size()))
    throw validation_error("lda: feature rows and labels disagree in length");
  if (n_classes < 2) throw validation_error("lda: need at least two classes");
  if (!(shrinkage >= 0.0 && shrinkage <= 1.0))
    throw validation_error("lda: shrinkage must lie in [0, 1]");
  if (n <= n_classes)
    throw validation_error("lda: need more samples than classes for a pooled covariance");

  std::vector<long long> counts(static_cast<std::size_t>(n_classes), 0);
  for (int y : labels) {
    if (y < 0 || y >= n_classes) throw validation_error("lda: label out of range");
    counts[static_cast<std::size_t>(y)] += 1;
  }
  for (int c = 0; c < n_classes; ++c)
    if (counts[static_cast<std::size_t>(c)] == 0)
      throw validation_error("lda: class " + std::to_string(c) + " absent from training data");

  LdaModel model;
  model.n_classes = n_classes;
  model.bins = std::move(bins);
  model.shrinkage = shrinkage;
  model.means = Eigen::MatrixXd::Zero(n_classes, k);
  for (Eigen::Index i = 0; i < n; ++i)
    model.means.row(labels[static_cast<std::size_t>(i)]) += features.row(i);
  for (int c = 0; c < n_classes; ++c)
    model.means.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);

  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::RowVectorXd centered =
        features.row(i) - model.means.row(labels[static_cast<std::size_t>(i)]);
    scatter.noalias() += centered.transpose() * centered;
  }
  Eigen::MatrixXd cov = scatter / static_cast<double>(n - n_classes);
  Eigen::MatrixXd shrunk =
      (1.0 - shrinkage) * cov + shrinkage * cov.diagonal().asDiagonal().toDenseMatrix();

  Eigen::LLT<Eigen::MatrixXd> llt(shrunk);
  if (llt.info() != Eigen::Success) {
    if (shrinkage == 0.0)
      throw numeric_error(
          "lda: pooled covariance is singular; refit with shrinkage > 0");
    // Zero-variance features (e.g. a noise-free cohort) leave exact zeros on
    // diag(Sigma) that diagonal shrinkage cannot lift. Fall back to a ridge
    // scaled by the shrinkage; as the scatter vanishes the discriminant
    // degenerates to the nearest-class-mean rule.
    const double lift = shrinkage * (cov.diagonal().mean() + 1e-12);
    shrunk.diagonal().array() += lift;
    llt.compute(shrunk);
    if (llt.info() != Eigen::Success)
      throw numeric_error("lda: covariance not positive definite even after shrinkage " +
                          std::to_string(shrinkage));
  }

  model.priors.resize(static_cast<std::size_t>(n_classes));
  model.weights = Eigen::MatrixXd::Zero(n_classes, k);
  model.bias = Eigen::VectorXd::Zero(n_classes);
  for (int c = 0; c < n_classes; ++c) {
    model.priors[static_cast<std::size_t>(c)] =
        static_cast<double>(counts[static_cast<std::size_t>(c)]) / static_cast<double>(n);
    Eigen::VectorXd w = llt.solve(model.means.row(c).transpose());
    model.weights.row(c) = w.transpose();
    model.bias(c) = -0.5 * model.means.row(c).dot(w) +
                    std::log(model.priors[static_cast<std::size_t>(c)]);
  }
  return model;
}

inline std::vector<int> lda_predict(const LdaModel& model, const Eigen::MatrixXd& features) {
  if (features.cols() != model.weights.cols())
    throw validation_error("lda: feature dimension does not match the fitted model");
  Eigen::MatrixXd scores = features * model.weights.transpose();
  scores.rowwise() += model.bias.transpose();
  std::vector<int> out(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    int best = 0;
    for (int c = 1; c < model.n_classes; ++c)
      if (scores(i, c) > scores(i, best)) best = c;
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

}  // namespace isonet
