// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#include "detqe/analysis.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "detqe/rng.hpp"

namespace detqe {
namespace {

double sq_dist(const Matd& points, long i, const Matd& centers, int c) {
  return (points.row(i) - centers.row(c)).squaredNorm();
}

// k-means++: each next center is drawn with probability proportional to the
// squared distance from the nearest already-chosen center. When every point
// coincides with a center the distances vanish; then any point will do.
Matd init_centers(const Matd& points, int k, Rng& rng) {
  const long n = points.rows();
  Matd centers(k, points.cols());
  centers.row(0) = points.row(static_cast<long>(rng.below(n)));
  std::vector<double> d2(n);
  for (long i = 0; i < n; ++i) d2[i] = (points.row(i) - centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    long pick = -1;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (long i = 0; i < n; ++i) {
        r -= d2[i];
        if (r <= 0.0) {
          pick = i;
          break;
        }
      }
      if (pick < 0) pick = n - 1;
    } else {
      pick = static_cast<long>(rng.below(n));
    }
    centers.row(c) = points.row(pick);
    for (long i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(i) - centers.row(c)).squaredNorm());
    }
  }
  return centers;
}

// Assign every point to its nearest center, ties to the lower index.
double assign(const Matd& points, const Matd& centers, std::vector<int>& out) {
  double inertia = 0.0;
  for (long i = 0; i < points.rows(); ++i) {
    int best = 0;
    double best_d = sq_dist(points, i, centers, 0);
    for (int c = 1; c < centers.rows(); ++c) {
      const double d = sq_dist(points, i, centers, c);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    out[static_cast<std::size_t>(i)] = best;
    inertia += best_d;
  }
  return inertia;
}

void check_same_items(const Matd& a, const Matd& b) {
  if (a.rows() != b.rows()) {
    throw input_error("representations cover " + std::to_string(a.rows()) + " vs " +
                      std::to_string(b.rows()) + " items");
  }
  if (a.rows() < 2) throw input_error("similarity needs at least 2 items");
}

Matd center_columns(const Matd& m) { return m.rowwise() - m.colwise().mean(); }

// Centered Gram matrix H K H with H = I - (1/n) 11^T.
Matd center_gram(const Matd& k) {
  Eigen::VectorXd row_mean = k.rowwise().mean();
  const double total_mean = row_mean.mean();
  Matd out = k;
  out.colwise() -= row_mean;
  out.rowwise() -= row_mean.transpose();
  out.array() += total_mean;
  return out;
}

// Left singular vectors spanning `variance_keep` of the squared spectrum.
Eigen::MatrixXd principal_directions(const Matd& m, double variance_keep) {
  const Eigen::MatrixXd centered = center_columns(m);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU);
  const Eigen::VectorXd& s = svd.singularValues();
  const double total = s.squaredNorm();
  if (!(total > 0.0)) throw input_error("representation has rank 0; no directions to compare");
  const double cutoff = s(0) * 1e-12;
  double acc = 0.0;
  long keep = 0;
  for (long i = 0; i < s.size(); ++i) {
    if (s(i) <= cutoff) break;
    acc += s(i) * s(i);
    ++keep;
    if (acc >= variance_keep * total) break;
  }
  return svd.matrixU().leftCols(keep);
}

}  // namespace

KMeansResult kmeans(const Matd& points, int n_centers, uint64_t seed, int max_iter, double tol) {
  if (points.rows() == 0) throw input_error("kmeans needs at least one point");
  if (n_centers < 1) throw config_error("n_centers must be >= 1");
  if (n_centers > points.rows()) {
    throw config_error("n_centers " + std::to_string(n_centers) + " exceeds " +
                       std::to_string(points.rows()) + " points");
  }
  if (max_iter < 1) throw config_error("max_iter must be >= 1");

  Rng rng(seed);
  KMeansResult res;
  res.centers = init_centers(points, n_centers, rng);
  res.assignments.resize(points.rows());

  for (int iter = 0; iter < max_iter; ++iter) {
    res.iters = iter + 1;
    res.inertia = assign(points, res.centers, res.assignments);
    res.inertia_curve.push_back(res.inertia);

    Matd sums = Matd::Zero(n_centers, points.cols());
    std::vector<long> counts(n_centers, 0);
    for (long i = 0; i < points.rows(); ++i) {
      sums.row(res.assignments[i]) += points.row(i);
      ++counts[res.assignments[i]];
    }
    Matd next(n_centers, points.cols());
    for (int c = 0; c < n_centers; ++c) {
      if (counts[c] > 0) {
        next.row(c) = sums.row(c) / static_cast<double>(counts[c]);
      } else {
        // Re-seed an empty cluster at the point farthest from its center;
        // that point's cost drops to zero, so inertia stays monotone.
        long far = 0;
        double far_d = -1.0;
        for (long i = 0; i < points.rows(); ++i) {
          const double d = sq_dist(points, i, res.centers, res.assignments[i]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        next.row(c) = points.row(far);
      }
    }
    const double shift = (next - res.centers).rowwise().norm().maxCoeff();
    res.centers = next;
    if (shift < tol) break;
  }
  res.inertia = assign(points, res.centers, res.assignments);
  res.inertia_curve.push_back(res.inertia);
  return res;
}

double entropy(const std::vector<int>& labels) {
  if (labels.empty()) throw input_error("entropy of an empty labeling");
  std::map<int, long> counts;
  for (int v : labels) ++counts[v];
  const double n = static_cast<double>(labels.size());
  double h = 0.0;
  for (const auto& [_, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h < 0.0 ? 0.0 : h;
}

double mutual_information(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty()) throw input_error("mutual information of an empty labeling");
  if (a.size() != b.size()) {
    throw input_error("labelings cover " + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()) + " items");
  }
  std::map<int, long> ca, cb;
  std::map<std::pair<int, int>, long> cab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++ca[a[i]];
    ++cb[b[i]];
    ++cab[{a[i], b[i]}];
  }
  const double n = static_cast<double>(a.size());
  double mi = 0.0;
  for (const auto& [key, c] : cab) {
    const double pxy = static_cast<double>(c) / n;
    const double px = static_cast<double>(ca[key.first]) / n;
    const double py = static_cast<double>(cb[key.second]) / n;
    mi += pxy * std::log(pxy / (px * py));
  }
  // An exactly independent pair can land a few ulp below zero.
  return mi < 0.0 ? 0.0 : mi;
}

MiLayerReport mi_over_layers(const std::vector<Matd>& layer_vectors, const std::vector<int>& labels,
                             int n_centers, uint64_t seed) {
  if (layer_vectors.empty()) throw input_error("no layers to analyze");
  if (labels.empty()) throw input_error("no labeled vectors to analyze");
  if (n_centers < 1) throw config_error("n_centers must be >= 1");
  for (std::size_t l = 0; l < layer_vectors.size(); ++l) {
    if (layer_vectors[l].rows() != static_cast<long>(labels.size())) {
      throw input_error("layer " + std::to_string(l) + " has " +
                        std::to_string(layer_vectors[l].rows()) + " vectors for " +
                        std::to_string(labels.size()) + " labels");
    }
  }

  MiLayerReport rep;
  rep.n_vectors = static_cast<long>(labels.size());
  {
    std::map<int, long> distinct;
    for (int v : labels) ++distinct[v];
    rep.n_tokens = static_cast<int>(distinct.size());
  }
  if (rep.n_vectors < n_centers) {
    rep.warnings.push_back("only " + std::to_string(rep.n_vectors) +
                           " vectors; n_centers reduced from " + std::to_string(n_centers));
    n_centers = static_cast<int>(rep.n_vectors);
  }
  rep.token_entropy = entropy(labels);
  for (std::size_t l = 0; l < layer_vectors.size(); ++l) {
    KMeansResult km = kmeans(layer_vectors[l], n_centers, derive_seed(seed, "mi.layer", l));
    rep.mi.push_back(mutual_information(labels, km.assignments));
  }
  return rep;
}

double linear_cka(const Matd& a, const Matd& b) {
  check_same_items(a, b);
  const Matd xc = center_columns(a);
  const Matd yc = center_columns(b);
  const double hsic_xy = (yc.transpose() * xc).squaredNorm();
  const double hsic_xx = (xc.transpose() * xc).squaredNorm();
  const double hsic_yy = (yc.transpose() * yc).squaredNorm();
  if (!(hsic_xx > 0.0) || !(hsic_yy > 0.0)) {
    throw input_error("representation has no variance; CKA is undefined");
  }
  return hsic_xy / std::sqrt(hsic_xx * hsic_yy);
}

double rbf_cka(const Matd& a, const Matd& b, double bandwidth_scale) {
  check_same_items(a, b);
  if (!(bandwidth_scale > 0.0)) throw config_error("bandwidth_scale must be > 0");
  const long n = a.rows();

  auto gram = [n, bandwidth_scale](const Matd& m) {
    Matd d2(n, n);
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (long i = 0; i < n; ++i) {
      d2(i, i) = 0.0;
      for (long j = i + 1; j < n; ++j) {
        const double d = (m.row(i) - m.row(j)).squaredNorm();
        d2(i, j) = d;
        d2(j, i) = d;
        dists.push_back(std::sqrt(d));
      }
    }
    auto mid = dists.begin() + dists.size() / 2;
    std::nth_element(dists.begin(), mid, dists.end());
    const double sigma = bandwidth_scale * *mid;
    if (!(sigma > 0.0)) throw input_error("median pairwise distance is zero; RBF kernel degenerates");
    return Matd((-d2 / (2.0 * sigma * sigma)).array().exp());
  };

  const Matd kc = center_gram(gram(a));
  const Matd lc = center_gram(gram(b));
  const double hsic_kl = kc.cwiseProduct(lc).sum();
  const double hsic_kk = kc.cwiseProduct(kc).sum();
  const double hsic_ll = lc.cwiseProduct(lc).sum();
  if (!(hsic_kk > 0.0) || !(hsic_ll > 0.0)) {
    throw input_error("representation has no variance; CKA is undefined");
  }
  return hsic_kl / std::sqrt(hsic_kk * hsic_ll);
}

double svcca(const Matd& a, const Matd& b, double variance_keep) {
  check_same_items(a, b);
  if (!(variance_keep > 0.0) || variance_keep > 1.0) {
    throw config_error("variance_keep must be in (0,1]");
  }
  const Eigen::MatrixXd ua = principal_directions(a, variance_keep);
  const Eigen::MatrixXd ub = principal_directions(b, variance_keep);
  // Columns of each U are orthonormal, so the canonical correlations are
  // the singular values of the cross product, clamped for rounding.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(ua.transpose() * ub);
  const Eigen::VectorXd& s = svd.singularValues();
  double acc = 0.0;
  for (long i = 0; i < s.size(); ++i) acc += std::min(1.0, std::max(0.0, s(i)));
  return acc / static_cast<double>(s.size());
}

}  // namespace detqe
