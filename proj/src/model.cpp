#include "subid/model.hpp"

#include <algorithm>
#include <cmath>

namespace subid {

bool is_killing(EventKind k) {
  return k == EventKind::insertion_end || k == EventKind::deletion_into_right_end ||
         k == EventKind::deletion_from_before || k == EventKind::deletion_in_end;
}

bool is_insertion(EventKind k) {
  return k == EventKind::insertion || k == EventKind::insertion_end;
}

const char* kind_name(EventKind k) {
  switch (k) {
    case EventKind::insertion: return "1";
    case EventKind::insertion_end: return "1_R";
    case EventKind::deletion: return "-1";
    case EventKind::deletion_into_right_end: return "-1_N";
    case EventKind::deletion_from_before: return "-1_P";
    case EventKind::deletion_in_end: return "-1_R";
  }
  return "?";
}

double total_indel_rate(const EndRegions& end, int n, const IndelParams& params) {
  SUBID_REQUIRE(n >= 1, "intermediate length must be >= 1");
  SUBID_REQUIRE(params.r_geom > 0.0, "r must be positive");
  const double R = end.total();
  return (R + n - 1) * params.lambda +
         (R + n + (1.0 - params.r_geom) / params.r_geom) * params.mu;
}

double long_deletion_rate(const IndelParams& params) {
  SUBID_REQUIRE(params.r_geom > 0.0 && params.r_geom <= 1.0, "r must lie in (0, 1]");
  return params.mu * (1.0 - params.r_geom) / params.r_geom;
}

double indel_length_logpmf(int l, double r) {
  SUBID_REQUIRE(l >= 1, "length must be >= 1");
  SUBID_REQUIRE(r > 0.0 && r <= 1.0, "r must lie in (0, 1]");
  if (r == 1.0) return l == 1 ? 0.0 : kNegInf;
  return std::log(r) + (l - 1) * std::log1p(-r);
}

double trunc_geometric_logpmf(int l, double r, int n) {
  SUBID_REQUIRE(n >= 1, "truncation bound must be >= 1");
  if (l < 1 || l > n) return kNegInf;
  if (r == 1.0) return l == 1 ? 0.0 : kNegInf;
  const double log_norm = std::log1p(-std::exp(n * std::log1p(-r)));
  return std::log(r) + (l - 1) * std::log1p(-r) - log_norm;
}

int sample_geometric(Rng& rng, double r) {
  SUBID_REQUIRE(r > 0.0 && r <= 1.0, "r must lie in (0, 1]");
  if (r == 1.0) return 1;
  // inverse cdf; U in (0,1)
  double u = runif(rng);
  if (u <= 0.0) u = std::numeric_limits<double>::min();
  const int l = 1 + static_cast<int>(std::floor(std::log(u) / std::log1p(-r)));
  return std::max(1, l);
}

int sample_trunc_geometric(Rng& rng, double r, int n) {
  SUBID_REQUIRE(n >= 1, "truncation bound must be >= 1");
  if (r == 1.0) return 1;
  const double tail = std::exp(n * std::log1p(-r));  // (1-r)^n
  const double u = runif(rng) * (1.0 - tail);
  const double v = 1.0 - u;  // in (tail, 1]
  const int l = 1 + static_cast<int>(std::floor(std::log(v) / std::log1p(-r)));
  return std::clamp(l, 1, n);
}

std::vector<int> replay_history(const IndelHistory& h, int n0,
                                const EndRegions& end, double edge_length) {
  SUBID_REQUIRE(n0 >= 1, "parent intermediate length must be >= 1");
  SUBID_REQUIRE(end.valid(), "invalid end-region pair");
  std::vector<int> lengths;
  lengths.reserve(h.events.size() + 1);
  lengths.push_back(n0);
  int n = n0;
  double prev_t = 0.0;
  for (std::size_t i = 0; i < h.events.size(); ++i) {
    const IndelEvent& ev = h.events[i];
    if (!(ev.time > prev_t))
      throw std::invalid_argument("event times must be strictly increasing");
    if (edge_length > 0.0 && !(ev.time < edge_length))
      throw std::invalid_argument("event time beyond edge length");
    prev_t = ev.time;
    if (ev.length < 1) throw std::invalid_argument("event length must be >= 1");
    if (is_killing(ev.kind)) {
      if (i + 1 != h.events.size())
        throw std::invalid_argument("killing event must be last");
      switch (ev.kind) {
        case EventKind::insertion_end:
        case EventKind::deletion_in_end:
          break;  // end-region positions carry no constraints used here
        case EventKind::deletion_from_before:
          if (ev.position >= 0 || ev.length <= -ev.position)
            throw std::invalid_argument("deletion_from_before must start at a "
                                        "negative link and reach the fragment");
          break;
        case EventKind::deletion_into_right_end: {
          if (ev.position < end.r_left || ev.position > end.r_left + n - 1)
            throw std::invalid_argument("deletion position outside intermediate links");
          if (ev.length <= max_nonkill_deletion(end, n, ev.position))
            throw std::invalid_argument("deletion too short to reach the right end");
          break;
        }
        default:
          throw std::logic_error("unreachable");
      }
      lengths.push_back(n);  // length irrelevant after a kill
      return lengths;
    }
    switch (ev.kind) {
      case EventKind::insertion:
        if (ev.position < end.r_left || ev.position > end.r_left + n)
          throw std::invalid_argument("insertion position outside intermediate links");
        n += ev.length;
        break;
      case EventKind::deletion: {
        if (ev.position < end.r_left || ev.position > end.r_left + n - 1)
          throw std::invalid_argument("deletion position outside intermediate links");
        if (ev.length > max_nonkill_deletion(end, n, ev.position))
          throw std::invalid_argument("deletion removes right-end bases or empties "
                                      "the intermediate region");
        n -= ev.length;
        break;
      }
      default:
        throw std::logic_error("unreachable");
    }
    SUBID_CHECK(n >= 1, "replay drove N below 1");
    lengths.push_back(n);
  }
  return lengths;
}

bool history_valid(const IndelHistory& h, int n0, const EndRegions& end,
                   double edge_length) {
  try {
    replay_history(h, n0, end, edge_length);
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

}  // namespace subid
