#include "cvgl/loss.hpp"

#include <cmath>
#include <stdexcept>

#include "cvgl/ops.hpp"

namespace cvgl {

namespace {

void require_normalized(const Tensor& v, const char* what) {
  if (v.rank() != 1) {
    throw std::invalid_argument(std::string("info_nce: ") + what + " must be a vector, got " +
                                shape_str(v.shape()));
  }
  double sq = 0.0;
  for (double x : v.data()) sq += x * x;
  if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) {
    throw std::invalid_argument(std::string("info_nce: ") + what +
                                " is not L2-normalized (norm deviates by more than 1e-6)");
  }
}

}  // namespace

Tensor info_nce(const Tensor& query, const std::vector<Tensor>& refs, int positive_index,
                const LossConfig& cfg) {
  if (cfg.tau <= 0) throw std::invalid_argument("info_nce: temperature must be positive");
  if (refs.empty()) throw std::invalid_argument("info_nce: need at least one reference");
  if (positive_index < 0 || positive_index >= static_cast<int>(refs.size())) {
    throw std::invalid_argument("info_nce: positive index " + std::to_string(positive_index) +
                                " out of range for " + std::to_string(refs.size()) + " references");
  }
  require_normalized(query, "query");
  std::vector<Tensor> scores;
  scores.reserve(refs.size());
  for (const Tensor& r : refs) {
    require_normalized(r, "reference");
    scores.push_back(scale(dot(query, r), 1.0 / cfg.tau));
  }
  Tensor all = concat(scores);
  return sub(logsumexp(all), select(all, positive_index));
}

Tensor batch_info_nce(const std::vector<Descriptor>& street, const std::vector<Descriptor>& satellite,
                      const LossConfig& cfg) {
  if (street.size() != satellite.size() || street.empty()) {
    throw std::invalid_argument("batch_info_nce: need equal nonempty view batches, got " +
                                std::to_string(street.size()) + " and " + std::to_string(satellite.size()));
  }
  const int n = static_cast<int>(street.size());
  auto direction = [&](const std::vector<Descriptor>& queries, const std::vector<Descriptor>& references) {
    std::vector<Tensor> refs;
    refs.reserve(references.size());
    for (const Descriptor& d : references) refs.push_back(d.values);
    Tensor total;
    for (int i = 0; i < n; ++i) {
      Tensor term = info_nce(queries[static_cast<std::size_t>(i)].values, refs, i, cfg);
      total = total.defined() ? add(total, term) : term;
    }
    return scale(total, 1.0 / n);
  };
  Tensor loss = direction(street, satellite);
  if (cfg.symmetric) loss = scale(add(loss, direction(satellite, street)), 0.5);
  return loss;
}

}  // namespace cvgl
