// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "detqe/detector.hpp"

namespace detqe {

// Lloyd's algorithm with k-means++ seeding. Deterministic for a fixed seed.
// `inertia_curve` holds the total squared distance after every assignment
// pass; it never increases. An empty cluster is re-seeded at the point
// farthest from its current center.
struct KMeansResult {
  Matd centers;                  // n_centers x dim
  std::vector<int> assignments;  // one per input row; ties go to the lower center
  std::vector<double> inertia_curve;
  double inertia = 0.0;
  int iters = 0;
};

KMeansResult kmeans(const Matd& points, int n_centers, uint64_t seed, int max_iter = 100,
                    double tol = 1e-8);

// Empirical entropy of a labeling, in nats.
double entropy(const std::vector<int>& labels);

// Mutual information between two labelings of the same items, in nats,
// from the empirical joint distribution.
double mutual_information(const std::vector<int>& a, const std::vector<int>& b);

// Similarity of two representations of the same n items (rows aligned).
// CKA is the normalized Hilbert-Schmidt independence criterion on centered
// Gram matrices; the RBF bandwidth is `bandwidth_scale` times the median
// pairwise distance. SVCCA keeps the top singular directions covering
// `variance_keep` of each side's variance, then averages the canonical
// correlations between the two subspaces.
double linear_cka(const Matd& a, const Matd& b);
double rbf_cka(const Matd& a, const Matd& b, double bandwidth_scale = 0.5);
double svcca(const Matd& a, const Matd& b, double variance_keep = 0.99);

// How much token identity survives at each target-side layer: gather the
// hidden vectors of the most frequent target tokens, cluster each layer's
// vectors, and measure mutual information between token and cluster.
struct MiLayerReport {
  std::vector<double> mi;      // per layer, index 0 = pre-position embeddings
  double token_entropy = 0.0;  // upper bound for every layer's MI
  int n_tokens = 0;            // distinct token types actually used
  long n_vectors = 0;
  std::vector<std::string> warnings;
};

// Clusters each layer's vectors and scores them against the shared labels.
// All layers must hold one vector per label, rows aligned.
MiLayerReport mi_over_layers(const std::vector<Matd>& layer_vectors, const std::vector<int>& labels,
                             int n_centers, uint64_t seed);

template <typename T>
MiLayerReport mi_per_layer(DetectorModel<T>& det, const std::vector<QERecord>& records, int top_f,
                           int n_centers, uint64_t seed) {
  if (records.empty()) throw input_error("mi_per_layer needs at least one record");
  if (top_f < 1) throw config_error("token set size must be >= 1");
  if (n_centers < 1) throw config_error("n_centers must be >= 1");

  MiLayerReport rep;
  std::map<int, long> freq;
  for (const QERecord& rec : records) {
    for (int tok : rec.mt) ++freq[tok];
  }
  if (static_cast<int>(freq.size()) < top_f) {
    rep.warnings.push_back("only " + std::to_string(freq.size()) +
                           " distinct target tokens; token set reduced from " +
                           std::to_string(top_f));
    top_f = static_cast<int>(freq.size());
  }
  std::vector<std::pair<int, long>> by_count(freq.begin(), freq.end());
  std::stable_sort(by_count.begin(), by_count.end(),
                   [](const auto& x, const auto& y) { return x.second > y.second; });
  std::map<int, int> token_label;
  for (int i = 0; i < top_f; ++i) token_label[by_count[i].first] = i;
  rep.n_tokens = top_f;

  // One states pass per record; rows are stacked per layer across the corpus.
  const int n_layers = det.config().layers + 1;
  std::vector<std::vector<Eigen::RowVectorXd>> rows(n_layers);
  std::vector<int> labels;
  for (const QERecord& rec : records) {
    DetectorOutput out = det.output(rec.src, with_ratio(rec.mt), true);
    for (std::size_t i = 0; i < rec.mt.size(); ++i) {
      auto it = token_label.find(rec.mt[i]);
      if (it == token_label.end()) continue;
      labels.push_back(it->second);
      // Decoder row 0 is the score slot; token i sits at row i+1.
      for (int l = 0; l < n_layers; ++l) rows[l].push_back(out.states.dec[l].row(i + 1));
    }
  }
  if (labels.empty()) throw input_error("selected tokens never occur in the records");

  std::vector<Matd> mats(n_layers);
  for (int l = 0; l < n_layers; ++l) {
    mats[l].resize(static_cast<long>(rows[l].size()), det.config().hidden);
    for (std::size_t i = 0; i < rows[l].size(); ++i) mats[l].row(static_cast<long>(i)) = rows[l][i];
  }
  MiLayerReport clustered = mi_over_layers(mats, labels, n_centers, seed);
  clustered.warnings.insert(clustered.warnings.begin(), rep.warnings.begin(), rep.warnings.end());
  return clustered;
}

// Representation drift between two checkpoints of the same architecture,
// measured on identical inputs. Final-layer vectors of every position are
// stacked across the corpus, separately per side.
struct SimilarityRow {
  std::string side;  // "src" or "tgt"
  double linear_cka = 0.0;
  double rbf_cka = 0.0;
  double svcca = 0.0;
};

template <typename T>
std::vector<SimilarityRow> before_after_similarity(DetectorModel<T>& before,
                                                   DetectorModel<T>& after,
                                                   const std::vector<QERecord>& records,
                                                   double rbf_scale = 0.5) {
  const ModelConfig& ca = before.config();
  const ModelConfig& cb = after.config();
  if (ca.layers != cb.layers || ca.hidden != cb.hidden || ca.heads != cb.heads ||
      ca.ffn != cb.ffn || ca.vocab_size != cb.vocab_size || ca.max_len != cb.max_len ||
      ca.causal_decoder != cb.causal_decoder) {
    throw config_error("models differ in architecture; representations are not comparable");
  }
  if (records.empty()) throw input_error("similarity needs at least one record");

  long src_rows = 0;
  long tgt_rows = 0;
  for (const QERecord& rec : records) {
    src_rows += static_cast<long>(rec.src.size());
    tgt_rows += static_cast<long>(rec.mt.size()) + 1;
  }
  Matd sa(src_rows, ca.hidden), sb(src_rows, ca.hidden);
  Matd ta(tgt_rows, ca.hidden), tb(tgt_rows, ca.hidden);
  long si = 0;
  long ti = 0;
  for (const QERecord& rec : records) {
    const std::vector<int> tgt = with_ratio(rec.mt);
    DetectorOutput oa = before.output(rec.src, tgt, true);
    DetectorOutput ob = after.output(rec.src, tgt, true);
    const Matd& ea = oa.states.enc.back();
    const Matd& eb = ob.states.enc.back();
    sa.middleRows(si, ea.rows()) = ea;
    sb.middleRows(si, eb.rows()) = eb;
    si += ea.rows();
    const Matd& da = oa.states.dec.back();
    const Matd& db = ob.states.dec.back();
    ta.middleRows(ti, da.rows()) = da;
    tb.middleRows(ti, db.rows()) = db;
    ti += da.rows();
  }

  std::vector<SimilarityRow> out;
  out.push_back({"src", linear_cka(sa, sb), rbf_cka(sa, sb, rbf_scale), svcca(sa, sb)});
  out.push_back({"tgt", linear_cka(ta, tb), rbf_cka(ta, tb, rbf_scale), svcca(ta, tb)});
  return out;
}

}  // namespace detqe
