#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cvgl/corruption.hpp"
#include "cvgl/tensor.hpp"

namespace cvgl {

/// Full ranking per query: reference indices by ascending L2 distance, ties
/// broken by ascending reference index.
struct RetrievalResult {
  std::vector<std::vector<int>> ranking;
  std::vector<int> ground_truth;
  int num_refs = 0;
};

RetrievalResult rank_by_distance(const std::vector<Tensor>& queries, const std::vector<Tensor>& refs,
                                 const std::vector<int>& ground_truth);

/// Fraction of queries whose ground truth ranks within the top k.
double recall_at_k(const RetrievalResult& result, int k);
double recall_at_k(const std::vector<Tensor>& queries, const std::vector<Tensor>& refs,
                   const std::vector<int>& ground_truth, int k);

/// ceil(1% of the reference count), never below 1.
int top_percent_k(int num_refs);

struct KindReport {
  CorruptionKind kind = CorruptionKind::gaussian_noise;
  std::vector<std::pair<int, double>> severity_r1;  // ascending severity
  double average_r1 = 0.0;
};

/// Clean R@K plus per-(kind, severity) corrupted R@1 and the two-level
/// average: per-kind mean over severities, then mean over kinds.
struct RobustnessReport {
  int num_queries = 0;
  int num_refs = 0;
  double clean_r1 = 0.0;
  double clean_r5 = 0.0;
  double clean_r10 = 0.0;
  double clean_r1pct = 0.0;
  std::vector<KindReport> kinds;
  std::optional<double> r1_cor;  // absent when no corruption was swept

  std::string table() const;
  /// One JSON object per metric cell, one per line; byte-stable under a
  /// fixed seed.
  std::vector<std::string> records() const;
};

}  // namespace cvgl
