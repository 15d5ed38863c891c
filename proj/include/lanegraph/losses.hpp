#pragma once

// Training objective terms with hand-derived gradients. Nothing here trains; the
// functions exist so a learned header suite can be fitted against the same
// contracts, and so the gradient algebra is pinned down by finite differences.

#include <vector>

#include <Eigen/Core>

#include "lanegraph/geom.hpp"
#include "lanegraph/raster.hpp"

namespace lanegraph {

struct LossWeights {
  double lambda_chamfer = 1.0;
  double lambda_cosine = 100.0;
  double lambda_focal = 10.0;
  double lambda_dt = 10.0;
  double focal_gamma = 2.0;

  void validate() const;
};

struct ChamferResult {
  double value = 0.0;
  std::vector<Point> grad;  // d value / d P.points()[k]
};

/// Symmetric Chamfer sum between P and Q densified at `spacing`: every sample of P
/// contributes its distance to the nearest sample of Q and vice versa. Nearest-point
/// ties go to the first index. The gradient is taken through the densification, i.e.
/// each sample is an affine combination of two original vertices of P.
ChamferResult chamfer(const Polyline& P, const Polyline& Q, double spacing = 1.0);

struct CosineResult {
  double value = 0.0;
  Point grad = Point::Zero();  // with respect to the unnormalised prediction
};

// 1 - <pred/|pred|, gt/|gt|>.
CosineResult cosine_loss(const Point& pred, const Point& gt);

struct FocalResult {
  double value = 0.0;
  Eigen::MatrixXd grad_logits;  // samples x classes
  bool clamped = false;         // some target probability was clamped to 1e-12
};

/// Focal cross-entropy normalised by the sum of focal weights:
///   w_k = (1 - p_k)^gamma,  value = sum_k -w_k log p_k / sum_k w_k
/// where p_k is the probability of sample k's target class. The gradient is with
/// respect to logits z with p = softmax(z) and includes the denominator. A zero
/// weight sum (every sample perfect) gives value 0 and zero gradient.
FocalResult focal_normalized(const Eigen::MatrixXd& probs, const std::vector<int>& targets,
                             double gamma = 2.0);
FocalResult focal_normalized_logits(const Eigen::MatrixXd& logits, const std::vector<int>& targets,
                                    double gamma = 2.0);

struct DtL2Result {
  double value = 0.0;
  RealGrid grad;
};

// Mean squared difference over all cells.
DtL2Result dt_l2(const DistanceField& pred, const DistanceField& gt);

struct LossParts {
  double chamfer = 0.0;
  double cosine = 0.0;
  double focal = 0.0;
  double dt = 0.0;
};

// Weighted sum; throws NumericError naming the first non-finite part.
double total_loss(const LossParts& parts, const LossWeights& weights = {});

}  // namespace lanegraph
