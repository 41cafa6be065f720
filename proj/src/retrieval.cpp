#include "cvgl/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cvgl {

RetrievalResult rank_by_distance(const std::vector<Tensor>& queries, const std::vector<Tensor>& refs,
                                 const std::vector<int>& ground_truth) {
  if (queries.empty()) throw std::invalid_argument("retrieval: need at least one query");
  if (refs.empty()) throw std::invalid_argument("retrieval: need at least one reference");
  if (ground_truth.size() != queries.size()) {
    throw std::invalid_argument("retrieval: ground truth size " + std::to_string(ground_truth.size()) +
                                " does not match " + std::to_string(queries.size()) + " queries");
  }
  const int n_refs = static_cast<int>(refs.size());
  for (int gt : ground_truth) {
    if (gt < 0 || gt >= n_refs) {
      throw std::invalid_argument("retrieval: ground-truth index " + std::to_string(gt) +
                                  " out of range for " + std::to_string(n_refs) + " references");
    }
  }

  RetrievalResult result;
  result.ground_truth = ground_truth;
  result.num_refs = n_refs;
  result.ranking.reserve(queries.size());
  for (const Tensor& q : queries) {
    std::vector<std::pair<double, int>> by_dist;
    by_dist.reserve(static_cast<std::size_t>(n_refs));
    for (int r = 0; r < n_refs; ++r) {
      const Tensor& ref = refs[static_cast<std::size_t>(r)];
      if (ref.shape() != q.shape()) {
        throw std::invalid_argument("retrieval: descriptor shapes differ, " + shape_str(q.shape()) + " vs " +
                                    shape_str(ref.shape()));
      }
      double sq = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i) {
        const double d = q.data()[i] - ref.data()[i];
        sq += d * d;
      }
      by_dist.emplace_back(sq, r);
    }
    std::sort(by_dist.begin(), by_dist.end());  // (distance, index): deterministic tie-break
    std::vector<int> order;
    order.reserve(by_dist.size());
    for (const auto& [d, r] : by_dist) order.push_back(r);
    result.ranking.push_back(std::move(order));
  }
  return result;
}

double recall_at_k(const RetrievalResult& result, int k) {
  if (k < 1) throw std::invalid_argument("recall_at_k: k must be at least 1");
  int hits = 0;
  for (std::size_t q = 0; q < result.ranking.size(); ++q) {
    const auto& order = result.ranking[q];
    const int depth = std::min<int>(k, static_cast<int>(order.size()));
    for (int i = 0; i < depth; ++i) {
      if (order[static_cast<std::size_t>(i)] == result.ground_truth[q]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(result.ranking.size());
}

double recall_at_k(const std::vector<Tensor>& queries, const std::vector<Tensor>& refs,
                   const std::vector<int>& ground_truth, int k) {
  return recall_at_k(rank_by_distance(queries, refs, ground_truth), k);
}

int top_percent_k(int num_refs) {
  if (num_refs < 1) throw std::invalid_argument("top_percent_k: need at least one reference");
  return std::max(1, static_cast<int>(std::ceil(0.01 * num_refs)));
}

namespace {

std::string fmt_rate(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

}  // namespace

std::string RobustnessReport::table() const {
  std::ostringstream os;
  os << "queries: " << num_queries << "  references: " << num_refs << "\n";
  os << "clean   R@1 " << fmt_rate(clean_r1) << "  R@5 " << fmt_rate(clean_r5) << "  R@10 "
     << fmt_rate(clean_r10) << "  R@1% " << fmt_rate(clean_r1pct) << "\n";
  if (!kinds.empty()) {
    os << "\n" << std::left << std::setw(16) << "corruption";
    for (const auto& [sev, r1] : kinds.front().severity_r1) os << "  sev" << sev << "  ";
    os << "   avg\n";
    for (const KindReport& k : kinds) {
      os << std::left << std::setw(16) << corruption_name(k.kind);
      for (const auto& [sev, r1] : k.severity_r1) os << fmt_rate(r1) << " ";
      os << "  " << fmt_rate(k.average_r1) << "\n";
    }
    if (r1_cor) os << "\nR@1_cor " << fmt_rate(*r1_cor) << "\n";
  }
  return os.str();
}

std::vector<std::string> RobustnessReport::records() const {
  std::vector<std::string> lines;
  auto emit = [&lines](nlohmann::json j) { lines.push_back(j.dump()); };
  emit({{"metric", "clean_recall"}, {"k", "1"}, {"value", clean_r1}});
  emit({{"metric", "clean_recall"}, {"k", "5"}, {"value", clean_r5}});
  emit({{"metric", "clean_recall"}, {"k", "10"}, {"value", clean_r10}});
  emit({{"metric", "clean_recall"}, {"k", "1%"}, {"value", clean_r1pct}});
  for (const KindReport& k : kinds) {
    for (const auto& [sev, r1] : k.severity_r1) {
      emit({{"metric", "corrupted_r1"}, {"kind", corruption_name(k.kind)}, {"severity", sev}, {"value", r1}});
    }
    emit({{"metric", "kind_avg_r1"}, {"kind", corruption_name(k.kind)}, {"value", k.average_r1}});
  }
  if (r1_cor) emit({{"metric", "r1_cor"}, {"value", *r1_cor}});
  return lines;
}

}  // namespace cvgl
