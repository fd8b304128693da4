#include "deepnotch/spectral/spikes.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <tuple>

#include "deepnotch/errors.hpp"

namespace deepnotch::spectral {

bool SpikeReport::all_paired() const {
  return std::all_of(spikes.begin(), spikes.end(), [](const Spike& s) { return s.paired; });
}

namespace {

double median_of(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<long>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace

SpikeReport detect_spikes(const Spectrum& s, double min_prominence, int dc_radius) {
  if (!(min_prominence > 1.0)) throw ContractError("detect_spikes: min_prominence must exceed 1");
  if (dc_radius < 1) throw ContractError("detect_spikes: DC exclusion radius must be at least 1");
  const int H = s.height, W = s.width;
  const int u0 = -W / 2, v0 = -H / 2;

  auto in_dc = [&](int u, int v) {
    const int wu = s.wrap_u(u), wv = s.wrap_v(v);
    return wu * wu + wv * wv <= dc_radius * dc_radius;
  };

  SpikeReport report;
  const double reference = kLevelUnit * std::sqrt(static_cast<double>(H) * W);
  report.reference_magnitude = reference;
  const double to_level = 1.0 / reference;

  std::vector<double> logmag(s.bins.size());
  for (std::size_t i = 0; i < logmag.size(); ++i) logmag[i] = std::log1p(to_level * std::abs(s.bins[i]));
  auto L = [&](int u, int v) { return logmag[s.index(u, v)]; };
  {
    std::vector<double> bg;
    bg.reserve(logmag.size());
    for (int v = v0; v < v0 + H; ++v) {
      for (int u = u0; u < u0 + W; ++u) {
        if (!in_dc(u, v)) bg.push_back(L(u, v));
      }
    }
    if (!bg.empty()) {
      report.background_max = *std::max_element(bg.begin(), bg.end());
      report.background_median = median_of(bg);
    }
  }

  std::vector<double> ring;
  ring.reserve(81);
  for (int v = v0; v < v0 + H; ++v) {
    for (int u = u0; u < u0 + W; ++u) {
      if (in_dc(u, v)) continue;
      const double c = L(u, v);
      bool peak = true;
      for (int dv = -1; dv <= 1 && peak; ++dv) {
        for (int du = -1; du <= 1; ++du) {
          if ((du || dv) && L(u + du, v + dv) >= c) {
            peak = false;
            break;
          }
        }
      }
      if (!peak) continue;
      ring.clear();
      for (int dv = -kAnnulusOuter; dv <= kAnnulusOuter; ++dv) {
        for (int du = -kAnnulusOuter; du <= kAnnulusOuter; ++du) {
          if (std::max(std::abs(du), std::abs(dv)) < kAnnulusInner) continue;
          if (in_dc(u + du, v + dv)) continue;
          ring.push_back(L(u + du, v + dv));
        }
      }
      if (ring.empty()) continue;
      const double med = median_of(ring);
      const double prom = med > 0.0 ? c / med : (c > 0.0 ? INFINITY : 1.0);
      if (prom > min_prominence) report.spikes.push_back({u, v, std::abs(s.at(u, v)), prom, false});
    }
  }

  // Pair conjugates and give both members the pair's strength so that they
  // sort next to each other.
  std::map<std::pair<int, int>, std::size_t> where;
  for (std::size_t i = 0; i < report.spikes.size(); ++i) where[{report.spikes[i].u, report.spikes[i].v}] = i;
  std::vector<double> pair_strength(report.spikes.size());
  std::vector<std::pair<int, int>> pair_key(report.spikes.size());
  for (std::size_t i = 0; i < report.spikes.size(); ++i) {
    auto& sp = report.spikes[i];
    const std::pair<int, int> mirror{s.wrap_u(-sp.u), s.wrap_v(-sp.v)};
    auto it = where.find(mirror);
    pair_strength[i] = sp.prominence;
    pair_key[i] = std::max(std::make_pair(sp.v, sp.u), std::make_pair(mirror.second, mirror.first));
    if (it != where.end()) {
      sp.paired = true;
      pair_strength[i] = std::max(sp.prominence, report.spikes[it->second].prominence);
    }
  }
  std::vector<std::size_t> order(report.spikes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& A = report.spikes[a];
    const auto& B = report.spikes[b];
    return std::make_tuple(-pair_strength[a], pair_key[a], -A.prominence, A.v, A.u) <
           std::make_tuple(-pair_strength[b], pair_key[b], -B.prominence, B.v, B.u);
  });
  std::vector<Spike> sorted;
  sorted.reserve(order.size());
  for (auto i : order) sorted.push_back(report.spikes[i]);
  report.spikes = std::move(sorted);
  return report;
}

}  // namespace deepnotch::spectral
