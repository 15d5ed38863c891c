#include "lanegraph/losses.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "lanegraph/errors.hpp"

namespace lanegraph {
namespace {

constexpr double kProbFloor = 1e-12;

struct Samples {
  std::vector<ArcSample> where;
  std::vector<Point> at;
};

Samples sample(const Polyline& p, double spacing) {
  Samples s;
  s.where = densify_parameters(p.points(), spacing);
  s.at = densify_points(p.points(), spacing);
  return s;
}

// Index of the first nearest point of `set` to q.
std::size_t nearest(const std::vector<Point>& set, const Point& q, double& dist) {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < set.size(); ++j) {
    const double d2 = (set[j] - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = j;
    }
  }
  dist = std::sqrt(best_d2);
  return best;
}

void scatter(std::vector<Point>& grad, const ArcSample& a, const Point& g) {
  grad[a.segment] += (1.0 - a.t) * g;
  grad[a.segment + 1] += a.t * g;
}

Point unit_or_zero(const Point& d, double norm) { return norm > 0.0 ? Point(d / norm) : Point::Zero(); }

}  // namespace

void LossWeights::validate() const {
  if (!(lambda_chamfer >= 0.0 && lambda_cosine >= 0.0 && lambda_focal >= 0.0 && lambda_dt >= 0.0 &&
        focal_gamma >= 0.0)) {
    throw ParameterError("loss weights and gamma must be non-negative");
  }
}

ChamferResult chamfer(const Polyline& P, const Polyline& Q, double spacing) {
  if (P.size() < 2 || Q.size() < 2) throw ParameterError("chamfer needs polylines of >= 2 points");
  const Samples sp = sample(P, spacing);
  const Samples sq = sample(Q, spacing);
  ChamferResult out;
  out.grad.assign(P.size(), Point::Zero());
  for (std::size_t i = 0; i < sp.at.size(); ++i) {
    double d = 0.0;
    const std::size_t j = nearest(sq.at, sp.at[i], d);
    out.value += d;
    scatter(out.grad, sp.where[i], unit_or_zero(sp.at[i] - sq.at[j], d));
  }
  for (std::size_t j = 0; j < sq.at.size(); ++j) {
    double d = 0.0;
    const std::size_t i = nearest(sp.at, sq.at[j], d);
    out.value += d;
    scatter(out.grad, sp.where[i], unit_or_zero(sp.at[i] - sq.at[j], d));
  }
  return out;
}

CosineResult cosine_loss(const Point& pred, const Point& gt) {
  const double np = pred.norm(), ng = gt.norm();
  if (!(np > 0.0) || !(ng > 0.0)) throw ParameterError("cosine loss of a zero vector");
  const Point p = pred / np, g = gt / ng;
  const double c = p.dot(g);
  return {1.0 - c, -(g - c * p) / np};
}

FocalResult focal_normalized(const Eigen::MatrixXd& probs, const std::vector<int>& targets,
                             double gamma) {
  if (static_cast<std::size_t>(probs.rows()) != targets.size()) {
    throw ParameterError("one target per probability row is required");
  }
  if (!(gamma >= 0.0)) throw ParameterError("gamma must be non-negative");
  const Eigen::Index n = probs.rows(), k = probs.cols();
  for (Eigen::Index r = 0; r < n; ++r) {
    if (std::abs(probs.row(r).sum() - 1.0) > 1e-6 || (probs.row(r).array() < 0.0).any()) {
      throw ParameterError("probability row " + std::to_string(r) + " is not a distribution");
    }
    if (targets[r] < 0 || targets[r] >= k) {
      throw ParameterError("target of row " + std::to_string(r) + " is out of range");
    }
  }

  FocalResult out;
  out.grad_logits = Eigen::MatrixXd::Zero(n, k);
  std::vector<double> pt(n), w(n), dw(n), dl(n);
  double num = 0.0, den = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    double p = probs(r, targets[r]);
    if (p < kProbFloor) {
      p = kProbFloor;
      out.clamped = true;
    }
    const double q = 1.0 - p;
    pt[r] = p;
    w[r] = std::pow(q, gamma);
    // d w / d p and d(-w log p) / d p
    dw[r] = gamma == 0.0 ? 0.0 : -gamma * std::pow(q, gamma - 1.0);
    dl[r] = -dw[r] * std::log(p) - w[r] / p;
    num += -w[r] * std::log(p);
    den += w[r];
  }
  if (den == 0.0) return out;
  out.value = num / den;
  // dp_t / dz_c = p_t (delta_tc - p_c)
  for (Eigen::Index r = 0; r < n; ++r) {
    const double scale = (dl[r] - out.value * dw[r]) / den * pt[r];
    for (Eigen::Index c = 0; c < k; ++c) {
      out.grad_logits(r, c) = scale * ((c == targets[r] ? 1.0 : 0.0) - probs(r, c));
    }
  }
  return out;
}

FocalResult focal_normalized_logits(const Eigen::MatrixXd& logits, const std::vector<int>& targets,
                                    double gamma) {
  Eigen::MatrixXd probs(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Eigen::ArrayXd e = (logits.row(r).array() - logits.row(r).maxCoeff()).exp();
    probs.row(r) = (e / e.sum()).matrix().transpose();
  }
  return focal_normalized(probs, targets, gamma);
}

DtL2Result dt_l2(const DistanceField& pred, const DistanceField& gt) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw ParameterError("dt_l2 shape mismatch");
  }
  const double n = static_cast<double>(pred.values.size());
  if (n == 0) return {0.0, RealGrid()};
  const RealGrid diff = pred.values - gt.values;
  return {diff.square().sum() / n, 2.0 * diff / n};
}

double total_loss(const LossParts& parts, const LossWeights& weights) {
  weights.validate();
  const std::pair<const char*, double> named[] = {
      {"chamfer", parts.chamfer}, {"cosine", parts.cosine}, {"focal", parts.focal}, {"dt", parts.dt}};
  for (const auto& [name, v] : named) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + name + " loss term");
  }
  return weights.lambda_chamfer * parts.chamfer + weights.lambda_cosine * parts.cosine +
         weights.lambda_focal * parts.focal + weights.lambda_dt * parts.dt;
}

}  // namespace lanegraph
