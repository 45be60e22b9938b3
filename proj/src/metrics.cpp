#include <algorithm>

#include "revfilt/harness.hpp"

namespace revfilt {

std::vector<double> improvement_series(const IterationTrace& trace) {
  if (trace.records.empty()) throw Error("improvement_series: empty trace");
  const auto p0 = trace.initial_psnr();
  if (!p0) throw Error("improvement_series: trace has no PSNR (no ground truth)");
  if (*p0 == 0.0) throw Error("improvement_series: initial PSNR is zero");
  std::vector<double> out;
  out.reserve(trace.records.size());
  for (const auto& r : trace.records) {
    if (!r.psnr_db) throw Error("improvement_series: record without PSNR");
    out.push_back((*r.psnr_db - *p0) / *p0 * 100.0);
  }
  return out;
}

ImprovementSummary aggregate_pmax(const std::vector<IterationTrace>& traces) {
  if (traces.empty()) throw Error("aggregate_pmax: no traces");
  ImprovementSummary s;
  s.filter = traces.front().filter;
  s.method = traces.front().method;
  s.accel = traces.front().accel;
  double total = 0.0;
  for (const auto& t : traces) {
    if (t.filter != s.filter || t.method != s.method || t.accel != s.accel) {
      throw Error("aggregate_pmax: traces mix (filter, method, accel) cells");
    }
    const auto series = improvement_series(t);
    const double best = *std::max_element(series.begin(), series.end());
    s.image_ids.push_back(t.image_id);
    s.per_image_max.push_back(best);
    total += best;
    if (t.diverged) ++s.diverged_count;
  }
  s.image_count = traces.size();
  s.p_max = total / static_cast<double>(traces.size());
  return s;
}

}  // namespace revfilt
