#include "driftgate/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "driftgate/error.hpp"
#include "driftgate/parallel.hpp"

namespace driftgate {

ClassHistogram histogram_of(std::span<const EmbeddingRecord> records, std::uint64_t* unlabeled) {
  ClassHistogram hist;
  std::uint64_t missing = 0;
  for (const auto& rec : records) {
    if (rec.label) {
      ++hist.counts[*rec.label];
    } else {
      ++missing;
    }
  }
  if (unlabeled) *unlabeled = missing;
  return hist;
}

BalanceReport balance(const ClassHistogram& hist) {
  std::vector<double> f;
  for (const auto& [label, count] : hist.counts) {
    if (count > 0) f.push_back(static_cast<double>(count));
  }
  if (f.empty()) throw InputError("balance metrics need at least one non-empty class");

  BalanceReport out;
  out.classes = f.size();
  const auto n = static_cast<double>(f.size());
  double total = 0.0;
  for (double v : f) total += v;
  out.samples = static_cast<std::uint64_t>(total);

  const double mu = total / n;
  double var = 0.0;
  for (double v : f) var += (v - mu) * (v - mu);
  out.cv = std::sqrt(var / n) / mu;

  if (f.size() == 1) {
    out.normalized_entropy = 1.0;
  } else {
    double h = 0.0;
    for (double v : f) {
      const double p = v / total;
      h -= p * std::log(p);
    }
    out.normalized_entropy = h / std::log(n);
  }

  const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
  out.imbalance_ratio = *hi / *lo;
  return out;
}

namespace {

struct Accumulator {
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }
  PairStats stats() const {
    return PairStats{mean, n == 0 ? 0.0 : std::sqrt(std::max(0.0, m2 / static_cast<double>(n)))};
  }
};

// First linear pair index whose left element is i, pairs ordered
// (0,1), (0,2), ..., (1,2), ...
std::uint64_t row_offset(std::uint64_t i, std::uint64_t n) { return i * (2 * n - i - 1) / 2; }

std::pair<std::size_t, std::size_t> unrank_pair(std::uint64_t k, std::uint64_t n) {
  std::uint64_t lo = 0;
  std::uint64_t hi = n - 1;
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (row_offset(mid, n) <= k) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const std::uint64_t j = lo + 1 + (k - row_offset(lo, n));
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(j)};
}

// Distinct pair indices drawn uniformly (Floyd's algorithm), sorted.
std::vector<std::uint64_t> sample_pairs(std::uint64_t total, std::uint64_t budget,
                                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(budget * 2);
  for (std::uint64_t j = total - budget; j < total; ++j) {
    std::uniform_int_distribution<std::uint64_t> dist(0, j);
    const std::uint64_t t = dist(rng);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  std::vector<std::uint64_t> out(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::uint64_t label_hash(const std::string& label) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

ClassDiversity class_diversity(const std::string& label,
                               const std::vector<const EmbeddingRecord*>& members,
                               const DiversityOptions& options) {
  const std::size_t n = members.size();
  const std::size_t dim = members.front()->vector.size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = members[i]->vector;
    if (v.size() != dim) throw InputError("class '" + label + "' mixes vector dimensions");
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    if (s == 0.0) {
      throw InputError("cosine similarity undefined for zero vector (frame " +
                       std::to_string(members[i]->frame) + ", patch " +
                       std::to_string(members[i]->patch) + ", label '" + label + "')");
    }
    norms[i] = std::sqrt(s);
  }

  ClassDiversity out;
  out.label = label;
  out.members = n;
  out.pairs_total = static_cast<std::uint64_t>(n) * (n - 1) / 2;

  Accumulator cosine;
  Accumulator distance;
  auto visit = [&](std::size_t i, std::size_t j) {
    const auto& a = members[i]->vector;
    const auto& b = members[j]->vector;
    double dot = 0.0;
    double sq = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double x = a[k];
      const double y = b[k];
      dot += x * y;
      sq += (x - y) * (x - y);
    }
    cosine.add(dot / (norms[i] * norms[j]));
    distance.add(std::sqrt(sq));
  };

  if (options.pair_budget && out.pairs_total > *options.pair_budget) {
    out.sampled = true;
    for (std::uint64_t k :
         sample_pairs(out.pairs_total, *options.pair_budget, options.seed ^ label_hash(label))) {
      const auto [i, j] = unrank_pair(k, n);
      visit(i, j);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) visit(i, j);
    }
  }
  out.pairs_used = cosine.n;
  out.cosine = cosine.stats();
  out.distance = distance.stats();
  return out;
}

}  // namespace

DiversityReport diversity(std::span<const EmbeddingRecord> records,
                          const DiversityOptions& options) {
  if (options.pair_budget && *options.pair_budget == 0) {
    throw InputError("pair budget must be positive");
  }
  std::map<std::string, std::vector<const EmbeddingRecord*>> groups;
  for (const auto& rec : records) {
    if (rec.label) groups[*rec.label].push_back(&rec);
  }

  DiversityReport report;
  std::vector<std::pair<const std::string*, const std::vector<const EmbeddingRecord*>*>> eligible;
  for (const auto& [label, members] : groups) {
    if (members.size() < 2) {
      report.excluded.push_back(label);
    } else {
      eligible.emplace_back(&label, &members);
    }
  }

  report.classes.resize(eligible.size());
  parallel_for(eligible.size(), [&](std::size_t i) {
    report.classes[i] = class_diversity(*eligible[i].first, *eligible[i].second, options);
  });

  Accumulator cos_means;
  Accumulator dist_means;
  for (const auto& c : report.classes) {
    report.sampled = report.sampled || c.sampled;
    cos_means.add(c.cosine.mean);
    dist_means.add(c.distance.mean);
  }
  report.macro_cosine = cos_means.stats();
  report.macro_distance = dist_means.stats();
  return report;
}

std::string to_json(const BalanceReport& r, int indent) {
  nlohmann::json j;
  j["cv"] = r.cv;
  j["normalized_entropy"] = r.normalized_entropy;
  j["imbalance_ratio"] = r.imbalance_ratio;
  j["classes"] = r.classes;
  j["samples"] = r.samples;
  return j.dump(indent);
}

std::string to_json(const DiversityReport& r, int indent) {
  nlohmann::json j;
  j["sampled"] = r.sampled;
  j["excluded"] = r.excluded;
  j["macro"] = {
      {"cosine_mean", r.macro_cosine.mean},
      {"cosine_std_between_classes", r.macro_cosine.std},
      {"distance_mean", r.macro_distance.mean},
      {"distance_std_between_classes", r.macro_distance.std},
  };
  auto& classes = j["classes"] = nlohmann::json::array();
  for (const auto& c : r.classes) {
    classes.push_back({
        {"label", c.label},
        {"members", c.members},
        {"pairs_total", c.pairs_total},
        {"pairs_used", c.pairs_used},
        {"sampled", c.sampled},
        {"cosine_mean", c.cosine.mean},
        {"cosine_std_over_pairs", c.cosine.std},
        {"distance_mean", c.distance.mean},
        {"distance_std_over_pairs", c.distance.std},
    });
  }
  return j.dump(indent);
}

std::string render_metric_table(const std::vector<std::string>& row_names,
                                const std::vector<std::string>& column_names,
                                const std::vector<std::vector<MetricCell>>& cells,
                                int precision) {
  std::vector<std::vector<std::string>> text(row_names.size());
  for (std::size_t r = 0; r < row_names.size(); ++r) {
    for (std::size_t c = 0; c < column_names.size(); ++c) {
      const MetricCell cell = (r < cells.size() && c < cells[r].size()) ? cells[r][c]
                                                                         : MetricCell{0, 0, false};
      if (!cell.present) {
        text[r].push_back("-");
        continue;
      }
      std::ostringstream s;
      s << std::fixed << std::setprecision(precision) << cell.mean << " ± " << cell.std;
      text[r].push_back(s.str());
    }
  }

  // "±" is two bytes but one column wide.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char ch : s) w += (ch & 0xC0) != 0x80;
    return w;
  };
  std::size_t label_w = 0;
  for (const auto& n : row_names) label_w = std::max(label_w, width(n));
  std::vector<std::size_t> col_w(column_names.size());
  for (std::size_t c = 0; c < column_names.size(); ++c) {
    col_w[c] = width(column_names[c]);
    for (const auto& row : text) col_w[c] = std::max(col_w[c], width(row[c]));
  }

  std::ostringstream out;
  auto pad = [&](const std::string& s, std::size_t w) {
    out << std::string(w - width(s), ' ') << s;
  };
  out << std::string(label_w, ' ');
  for (std::size_t c = 0; c < column_names.size(); ++c) {
    out << "  ";
    pad(column_names[c], col_w[c]);
  }
  out << '\n';
  for (std::size_t r = 0; r < row_names.size(); ++r) {
    out << row_names[r] << std::string(label_w - width(row_names[r]), ' ');
    for (std::size_t c = 0; c < column_names.size(); ++c) {
      out << "  ";
      pad(text[r][c], col_w[c]);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace driftgate
