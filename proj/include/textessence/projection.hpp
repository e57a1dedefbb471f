#pragma once

// 2-D t-SNE projection of concept vectors and Procrustes alignment of
// projections across corpora.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "textessence/detail/random.hpp"
#include "textessence/error.hpp"
#include "textessence/ingest.hpp"

namespace textessence {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

struct ProjectionFrame {
  std::string corpus_id;
  std::map<ConceptId, Point2> points;
  bool aligned = false;
  std::uint64_t seed = 0;
  double perplexity = 0.0;
  double kl_final = 0.0;

  friend bool operator==(const ProjectionFrame&, const ProjectionFrame&) = default;
};

struct TsneOptions {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  std::uint64_t seed = 42;
  double exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch = 250;
  double init_sigma = 1e-4;
  std::optional<double> learning_rate;  // default max(50, n / 12)
};

struct TsneResult {
  ProjectionFrame frame;
  double kl_after_exaggeration = 0.0;
  bool degenerate = false;  // all input distances equal; seeded random layout
  std::vector<std::string> warnings;
};

namespace detail {

// Exact KL(P || Q) for a 2-D layout; `p` is the joint n x n matrix.
inline double tsne_kl(const std::vector<double>& p, const std::vector<double>& y, std::size_t n) {
  std::vector<double> num(n * n, 0.0);
  double sum_q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y[2 * i] - y[2 * j];
      const double dy = y[2 * i + 1] - y[2 * j + 1];
      const double q = 1.0 / (1.0 + dx * dx + dy * dy);
      num[i * n + j] = num[j * n + i] = q;
      sum_q += 2.0 * q;
    }
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double pij = p[i * n + j];
      const double qij = std::max(num[i * n + j] / sum_q, 1e-12);
      kl += pij * std::log(pij / qij);
    }
  }
  return std::max(kl, 0.0);
}

// Row-conditional affinities with a per-row precision found by bisection so
// that each row's entropy matches log(perplexity).
inline std::vector<double> conditional_affinities(const std::vector<double>& dist, std::size_t n, double perplexity) {
  std::vector<double> p(n * n, 0.0);
  const double target = std::log(perplexity);
  for (std::size_t i = 0; i < n; ++i) {
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) dmin = std::min(dmin, dist[i * n + j]);
    }
    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 200; ++iter) {
      double sum = 0.0;
      double weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double d = dist[i * n + j] - dmin;
        const double v = std::exp(-beta * d);
        p[i * n + j] = v;
        sum += v;
        weighted += d * v;
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      for (std::size_t j = 0; j < n; ++j) p[i * n + j] /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0.0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
    }
  }
  return p;
}

}  // namespace detail

/// Exact t-SNE on cosine distances (1 - cosine). Deterministic for a fixed
/// seed. Points are processed in ascending id order.
inline TsneResult tsne_project(const std::map<ConceptId, std::vector<double>>& vectors, const TsneOptions& options,
                               std::string corpus_id = {}) {
  const std::size_t n = vectors.size();
  if (n < 4) throw Error(ErrorCode::TooFewPoints, "t-SNE needs at least 4 points, got " + std::to_string(n));
  if (!(options.perplexity > 0.0)) throw Error(ErrorCode::InvalidArgument, "perplexity must be positive");
  if (options.iterations == 0) throw Error(ErrorCode::InvalidArgument, "iterations must be positive");

  TsneResult result;
  auto& frame = result.frame;
  frame.corpus_id = std::move(corpus_id);
  frame.seed = options.seed;
  frame.perplexity = options.perplexity;
  const double max_perplexity = static_cast<double>(n - 1) / 3.0;
  if (frame.perplexity >= max_perplexity) {
    frame.perplexity = std::nextafter(max_perplexity, 0.0);
    result.warnings.push_back("perplexity " + std::to_string(options.perplexity) + " too large for " +
                              std::to_string(n) + " points; clamped to " + std::to_string(frame.perplexity));
  }

  std::vector<const ConceptId*> ids;
  std::vector<const std::vector<double>*> xs;
  for (const auto& [id, v] : vectors) {
    ids.push_back(&id);
    xs.push_back(&v);
  }
  const std::size_t dim = xs.front()->size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (xs[i]->size() != dim) throw Error(ErrorCode::DimensionMismatch, "t-SNE input vectors differ in length");
    double s = 0.0;
    for (double v : *xs[i]) s += v * v;
    norms[i] = std::sqrt(s);
    if (norms[i] == 0.0) throw Error(ErrorCode::ZeroVector, "t-SNE input '" + *ids[i] + "' is a zero vector");
  }

  std::vector<double> dist(n * n, 0.0);
  double dmin = std::numeric_limits<double>::infinity();
  double dmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = 0.0;
      for (std::size_t c = 0; c < dim; ++c) d += (*xs[i])[c] * (*xs[j])[c];
      const double cos = std::clamp(d / (norms[i] * norms[j]), -1.0, 1.0);
      dist[i * n + j] = dist[j * n + i] = 1.0 - cos;
      dmin = std::min(dmin, 1.0 - cos);
      dmax = std::max(dmax, 1.0 - cos);
    }
  }

  detail::Rng rng(options.seed);
  std::vector<double> y(2 * n);
  std::vector<double> p(n * n, 0.0);

  if (dmax - dmin <= 1e-12) {
    result.degenerate = true;
    result.warnings.push_back("all pairwise distances are equal; using a seeded random layout");
    for (auto& v : y) v = rng.normal();
    const double uniform = 1.0 / static_cast<double>(n * (n - 1));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) p[i * n + j] = uniform;
      }
    }
    frame.kl_final = detail::tsne_kl(p, y, n);
    result.kl_after_exaggeration = frame.kl_final;
    for (std::size_t i = 0; i < n; ++i) frame.points[*ids[i]] = {y[2 * i], y[2 * i + 1]};
    return result;
  }

  const auto cond = detail::conditional_affinities(dist, n, frame.perplexity);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      p[i * n + j] = cond[i * n + j] + cond[j * n + i];
      total += p[i * n + j];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) p[i * n + j] = std::max(p[i * n + j] / total, 1e-12);
    }
  }

  for (auto& v : y) v = options.init_sigma * rng.normal();

  const double eta = options.learning_rate.value_or(std::max(50.0, static_cast<double>(n) / 12.0));
  std::vector<double> update(2 * n, 0.0);
  std::vector<double> gains(2 * n, 1.0);
  std::vector<double> grad(2 * n, 0.0);
  std::vector<double> num(n * n, 0.0);
  double momentum = options.initial_momentum;
  const std::size_t exaggeration_end = std::min(options.exaggeration_iterations, options.iterations);
  result.kl_after_exaggeration = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t iter = 0; iter < options.iterations; ++iter) {
    if (iter == options.momentum_switch) momentum = options.final_momentum;
    const double exaggeration = iter < exaggeration_end ? options.exaggeration : 1.0;

    double sum_q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = y[2 * i] - y[2 * j];
        const double dy = y[2 * i + 1] - y[2 * j + 1];
        const double q = 1.0 / (1.0 + dx * dx + dy * dy);
        num[i * n + j] = num[j * n + i] = q;
        sum_q += 2.0 * q;
      }
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = num[i * n + j];
        const double mult = (exaggeration * p[i * n + j] - q / sum_q) * q;
        grad[2 * i] += 4.0 * mult * (y[2 * i] - y[2 * j]);
        grad[2 * i + 1] += 4.0 * mult * (y[2 * i + 1] - y[2 * j + 1]);
      }
    }
    for (std::size_t c = 0; c < 2 * n; ++c) {
      const bool same_sign = (grad[c] > 0.0) == (update[c] > 0.0);
      gains[c] = same_sign ? gains[c] * 0.8 : gains[c] + 0.2;
      gains[c] = std::max(gains[c], 0.01);
      update[c] = momentum * update[c] - eta * gains[c] * grad[c];
      y[c] += update[c];
    }
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += y[2 * i];
      my += y[2 * i + 1];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[2 * i] -= mx;
      y[2 * i + 1] -= my;
    }
    if (iter + 1 == exaggeration_end) result.kl_after_exaggeration = detail::tsne_kl(p, y, n);
  }

  frame.kl_final = detail::tsne_kl(p, y, n);
  if (std::isnan(result.kl_after_exaggeration)) result.kl_after_exaggeration = frame.kl_final;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(y[2 * i]) || !std::isfinite(y[2 * i + 1])) {
      throw Error(ErrorCode::Internal, "t-SNE produced a non-finite coordinate");
    }
    frame.points[*ids[i]] = {y[2 * i], y[2 * i + 1]};
  }
  return result;
}

/// y = scale * rotation * x + translation. The rotation may include a reflection.
struct AlignmentTransform {
  std::array<std::array<double, 2>, 2> rotation{{{1.0, 0.0}, {0.0, 1.0}}};
  double scale = 1.0;
  Point2 translation;
  double disparity_before = 0.0;
  double disparity_after = 0.0;

  Point2 apply(const Point2& p) const {
    return {scale * (rotation[0][0] * p.x + rotation[0][1] * p.y) + translation.x,
            scale * (rotation[1][0] * p.x + rotation[1][1] * p.y) + translation.y};
  }

  bool is_identity() const {
    return rotation[0][0] == 1.0 && rotation[0][1] == 0.0 && rotation[1][0] == 0.0 && rotation[1][1] == 1.0 &&
           scale == 1.0 && translation == Point2{};
  }
};

struct AlignResult {
  AlignmentTransform transform;
  ProjectionFrame frame;
  std::optional<std::string> warning;
};

namespace detail {

inline double disparity(const std::vector<Point2>& a, const std::vector<Point2>& b, const AlignmentTransform& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Point2 p = t.apply(a[i]);
    s += (p.x - b[i].x) * (p.x - b[i].x) + (p.y - b[i].y) * (p.y - b[i].y);
  }
  return std::sqrt(s);
}

}  // namespace detail

/// Fits a similarity transform (rotation/reflection, uniform scale,
/// translation) taking the source frame's shared concepts onto the target's,
/// then applies it to every source point. Falls back to the identity when
/// fewer than 3 concepts are shared or the fit does not reduce disparity.
inline AlignResult procrustes_align(const ProjectionFrame& source, const ProjectionFrame& target) {
  AlignResult result;
  std::vector<Point2> src;
  std::vector<Point2> dst;
  for (const auto& [id, p] : source.points) {
    if (const auto it = target.points.find(id); it != target.points.end()) {
      src.push_back(p);
      dst.push_back(it->second);
    }
  }
  const AlignmentTransform identity;
  auto finish = [&](const AlignmentTransform& t) {
    result.transform = t;
    result.frame = source;
    result.frame.aligned = true;
    for (auto& [id, p] : result.frame.points) p = t.apply(p);
  };

  if (src.size() < 3) {
    result.warning = "corpus '" + source.corpus_id + "' shares " + std::to_string(src.size()) +
                     " concept(s) with '" + target.corpus_id + "'; alignment needs 3, using identity";
    finish(identity);
    return result;
  }

  const double before = detail::disparity(src, dst, identity);
  Eigen::Vector2d mu_src = Eigen::Vector2d::Zero();
  Eigen::Vector2d mu_dst = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_src += Eigen::Vector2d(src[i].x, src[i].y);
    mu_dst += Eigen::Vector2d(dst[i].x, dst[i].y);
  }
  mu_src /= static_cast<double>(src.size());
  mu_dst /= static_cast<double>(src.size());

  Eigen::Matrix2d cross = Eigen::Matrix2d::Zero();
  double src_ss = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Eigen::Vector2d a = Eigen::Vector2d(src[i].x, src[i].y) - mu_src;
    const Eigen::Vector2d b = Eigen::Vector2d(dst[i].x, dst[i].y) - mu_dst;
    cross += b * a.transpose();
    src_ss += a.squaredNorm();
  }

  AlignmentTransform fitted;
  fitted.disparity_before = before;
  bool usable = src_ss > 0.0;
  if (usable) {
    const Eigen::JacobiSVD<Eigen::Matrix2d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix2d rot = svd.matrixU() * svd.matrixV().transpose();
    const double scale = svd.singularValues().sum() / src_ss;
    usable = scale > 0.0 && std::isfinite(scale);
    if (usable) {
      const Eigen::Vector2d t = mu_dst - scale * rot * mu_src;
      fitted.rotation = {{{rot(0, 0), rot(0, 1)}, {rot(1, 0), rot(1, 1)}}};
      fitted.scale = scale;
      fitted.translation = {t.x(), t.y()};
      fitted.disparity_after = detail::disparity(src, dst, fitted);
    }
  }
  if (!usable || !(fitted.disparity_after < before)) {
    AlignmentTransform t = identity;
    t.disparity_before = t.disparity_after = before;
    if (!usable) result.warning = "degenerate point configuration in '" + source.corpus_id + "'; using identity";
    finish(t);
    return result;
  }
  finish(fitted);
  return result;
}

struct ChainResult {
  std::vector<ProjectionFrame> frames;
  std::vector<AlignmentTransform> transforms;  // transforms[i] maps frame i onto aligned frame i-1; [0] is identity
  std::vector<std::string> warnings;
};

/// Aligns each frame to its already-aligned predecessor. Frame 0 is kept.
inline ChainResult align_chain(std::vector<ProjectionFrame> frames) {
  if (frames.empty()) throw Error(ErrorCode::InvalidArgument, "align_chain needs at least one frame");
  ChainResult out;
  frames.front().aligned = true;
  out.frames.push_back(std::move(frames.front()));
  out.transforms.emplace_back();
  for (std::size_t i = 1; i < frames.size(); ++i) {
    auto aligned = procrustes_align(frames[i], out.frames.back());
    if (aligned.warning) out.warnings.push_back(*aligned.warning);
    out.transforms.push_back(aligned.transform);
    out.frames.push_back(std::move(aligned.frame));
  }
  return out;
}

}  // namespace textessence
