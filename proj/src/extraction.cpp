#include "sea/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>

#include "sea/error.hpp"

namespace sea {

namespace {

std::vector<double> standardized(const Image& image) {
  std::vector<double> values = image.values();
  return standardize(values);
}

}  // namespace

QueryLog::QueryLog(std::vector<LoggedQuery> entries) {
  for (auto& e : entries) append(e.timestamp, std::move(e.image));
}

void QueryLog::append(std::int64_t timestamp, Image image) {
  if (!entries_.empty()) {
    if (timestamp <= entries_.back().timestamp)
      throw InvalidInput("query log timestamps must be strictly increasing");
    if (image.dims() != entries_.front().image.dims())
      throw InvalidInput("query log images must share dimensions");
  }
  entries_.push_back({timestamp, std::move(image)});
}

std::optional<Dims> QueryLog::dims() const {
  if (entries_.empty()) return std::nullopt;
  return entries_.front().image.dims();
}

ExtractionResult extract_trace(const QueryLog& log, const Image& adv, double r) {
  if (!(r > 0.0 && r < 1.0)) throw InvalidInput("correlation threshold r must lie in (0,1)");
  if (auto dims = log.dims(); dims && *dims != adv.dims())
    throw InvalidInput("adversarial example dimensions do not match the log");

  ExtractionResult result;
  std::size_t eligible = log.size();
  std::optional<std::size_t> adv_log_index;
  // The reported example is the last logged copy of adv; later entries are not part of the trace.
  for (std::size_t i = log.size(); i-- > 0;) {
    if (log[i].image == adv) {
      adv_log_index = i;
      eligible = i;
      break;
    }
  }
  result.adv_in_log = adv_log_index.has_value();

  std::vector<std::vector<double>> z(eligible);
  for (std::size_t i = 0; i < eligible; ++i) z[i] = standardized(log[i].image);

  // Breadth-first growth of the connected component containing adv; the
  // closure is a fixed point, so visiting order does not affect membership.
  std::vector<bool> member(eligible, false);
  const std::vector<double> adv_z = standardized(adv);
  std::deque<const std::vector<double>*> queue{&adv_z};
  while (!queue.empty()) {
    const std::vector<double>& current = *queue.front();
    queue.pop_front();
    for (std::size_t i = 0; i < eligible; ++i) {
      if (member[i] || dot(std::span<const double>(current), std::span<const double>(z[i])) < r) continue;
      member[i] = true;
      queue.push_back(&z[i]);
    }
  }

  for (std::size_t i = 0; i < eligible; ++i) {
    if (!member[i]) continue;
    result.trace.queries.push_back(log[i].image);
    result.trace.log_indices.emplace_back(i);
  }
  result.trace.queries.push_back(adv);
  result.trace.log_indices.push_back(adv_log_index);
  return result;
}

Image downscale(const Image& image, std::size_t side) {
  const Dims& in = image.dims();
  if (side == 0) throw InvalidInput("downscale: side must be positive");
  if (side > std::min(in.height, in.width))
    throw InvalidInput("downscale: side exceeds the image's spatial size");
  Dims out{side, side, in.channels};
  std::vector<double> values(out.size());
  const double sy = static_cast<double>(in.height) / static_cast<double>(side);
  const double sx = static_cast<double>(in.width) / static_cast<double>(side);
  auto at = [&](std::size_t y, std::size_t x, std::size_t c) {
    return image.value((y * in.width + x) * in.channels + c);
  };
  for (std::size_t y = 0; y < side; ++y) {
    double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                           static_cast<double>(in.height - 1));
    auto y0 = static_cast<std::size_t>(fy);
    std::size_t y1 = std::min(y0 + 1, in.height - 1);
    double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < side; ++x) {
      double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                             static_cast<double>(in.width - 1));
      auto x0 = static_cast<std::size_t>(fx);
      std::size_t x1 = std::min(x0 + 1, in.width - 1);
      double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < in.channels; ++c) {
        double top = (1 - wx) * at(y0, x0, c) + wx * at(y0, x1, c);
        double bottom = (1 - wx) * at(y1, x0, c) + wx * at(y1, x1, c);
        values[(y * side + x) * in.channels + c] = (1 - wy) * top + wy * bottom;
      }
    }
  }
  return Image::quantize(out, values);
}

QueryLog downscale(const QueryLog& log, std::size_t side) {
  QueryLog out;
  for (const auto& e : log.entries()) out.append(e.timestamp, downscale(e.image, side));
  return out;
}

PrecisionRecall score_extraction(const std::vector<std::optional<std::size_t>>& extracted,
                                 const std::vector<std::size_t>& truth) {
  std::set<std::size_t> truth_set(truth.begin(), truth.end());
  std::size_t found = 0, hits = 0;
  for (const auto& idx : extracted) {
    if (!idx) continue;
    ++found;
    if (truth_set.count(*idx)) ++hits;
  }
  PrecisionRecall pr;
  pr.precision = found == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(found);
  pr.recall = truth_set.empty() ? 1.0 : static_cast<double>(hits) / static_cast<double>(truth_set.size());
  return pr;
}

}  // namespace sea
