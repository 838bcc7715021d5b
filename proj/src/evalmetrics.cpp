#include "spamprop/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "spamprop/error.hpp"

namespace spamprop {

std::size_t Contingency::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (auto x : row) n += x;
  }
  return n;
}

Contingency contingency(const std::map<std::string, std::size_t>& doc_community,
                        const std::map<std::string, std::size_t>& doc_topic) {
  if (doc_community.size() != doc_topic.size()) {
    throw DataError("community and topic mappings cover different documents");
  }
  std::set<std::size_t> cs;
  std::set<std::size_t> ts;
  for (const auto& [doc, c] : doc_community) {
    const auto it = doc_topic.find(doc);
    if (it == doc_topic.end()) throw DataError("document '" + doc + "' has no topic label");
    cs.insert(c);
    ts.insert(it->second);
  }
  Contingency table;
  table.communities.assign(cs.begin(), cs.end());
  table.topics.assign(ts.begin(), ts.end());
  table.counts.assign(cs.size(), std::vector<std::size_t>(ts.size(), 0));
  auto index = [](const std::vector<std::size_t>& ids, std::size_t id) {
    return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };
  for (const auto& [doc, c] : doc_community) {
    ++table.counts[index(table.communities, c)][index(table.topics, doc_topic.at(doc))];
  }
  return table;
}

namespace {

// Terms are summed in sorted order so the result depends only on the
// multiset of terms: transposing or relabeling a table is then bit-exact.
double sorted_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

double entropy_of(std::span<const double> counts, double total) {
  std::vector<double> terms;
  for (double n : counts) {
    if (n > 0) terms.push_back(-(n / total) * std::log(n / total));
  }
  return sorted_sum(terms);
}

}  // namespace

Scores homogeneity_completeness_v(const Contingency& table) {
  const auto rows = table.counts.size();
  const auto cols = rows ? table.counts.front().size() : 0;
  const double n = static_cast<double>(table.total());
  Scores s{1.0, 1.0, 1.0};
  if (n == 0) return s;

  std::vector<double> row_sum(rows, 0.0);
  std::vector<double> col_sum(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      row_sum[i] += static_cast<double>(table.counts[i][j]);
      col_sum[j] += static_cast<double>(table.counts[i][j]);
    }
  }
  const double h_c = entropy_of(row_sum, n);
  const double h_t = entropy_of(col_sum, n);
  std::vector<double> c_given_t, t_given_c;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double x = static_cast<double>(table.counts[i][j]);
      if (x == 0) continue;
      c_given_t.push_back(-(x / n) * std::log(x / col_sum[j]));
      t_given_c.push_back(-(x / n) * std::log(x / row_sum[i]));
    }
  }
  const double h_c_given_t = sorted_sum(c_given_t);
  const double h_t_given_c = sorted_sum(t_given_c);
  s.homogeneity = h_c == 0.0 ? 1.0 : 1.0 - h_c_given_t / h_c;
  s.completeness = h_t == 0.0 ? 1.0 : 1.0 - h_t_given_c / h_t;
  s.homogeneity = std::clamp(s.homogeneity, 0.0, 1.0);
  s.completeness = std::clamp(s.completeness, 0.0, 1.0);
  const double sum = s.homogeneity + s.completeness;
  s.v_measure = sum == 0.0 ? 0.0 : 2.0 * s.homogeneity * s.completeness / sum;
  return s;
}

ZTest two_sample_z(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw DataError("Z test needs at least two values per sample");
  auto moments = [](std::span<const double> x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss};
  };
  const auto [ma, ssa] = moments(a);
  const auto [mb, ssb] = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  ZTest t;
  const double pooled = (ssa + ssb) / (na + nb - 2.0);
  if (pooled == 0.0) {
    t.degenerate = true;
    t.z = 0.0;
    t.p = ma == mb ? 1.0 : 0.0;
    return t;
  }
  const double se = std::sqrt(pooled * (1.0 / na + 1.0 / nb));
  t.z = (ma - mb) / se;
  t.p = std::erfc(std::abs(t.z) / std::sqrt(2.0));
  return t;
}

ValidationReport compare_to_null(std::span<const Scores> actual, std::span<const Scores> null_scores) {
  auto column = [](std::span<const Scores> s, double Scores::*m) {
    std::vector<double> out;
    out.reserve(s.size());
    for (const auto& x : s) out.push_back(x.*m);
    return out;
  };
  auto mean_of = [&](std::span<const Scores> s) {
    Scores m{0.0, 0.0, 0.0};
    for (const auto& x : s) {
      m.homogeneity += x.homogeneity;
      m.completeness += x.completeness;
      m.v_measure += x.v_measure;
    }
    const double n = static_cast<double>(std::max<std::size_t>(s.size(), 1));
    m.homogeneity /= n;
    m.completeness /= n;
    m.v_measure /= n;
    return m;
  };
  ValidationReport r;
  r.actual_mean = mean_of(actual);
  r.null_mean = mean_of(null_scores);
  r.homogeneity = two_sample_z(column(actual, &Scores::homogeneity),
                               column(null_scores, &Scores::homogeneity));
  r.completeness = two_sample_z(column(actual, &Scores::completeness),
                                column(null_scores, &Scores::completeness));
  return r;
}

double normalized_mutual_information(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
  if (a.size() != b.size()) throw DataError("labelings differ in length");
  if (a.empty()) return 1.0;
  std::map<std::int64_t, double> pa, pb;
  std::map<std::pair<std::int64_t, std::int64_t>, double> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa[a[i]] += 1;
    pb[b[i]] += 1;
    joint[{a[i], b[i]}] += 1;
  }
  const double n = static_cast<double>(a.size());
  auto h = [&](const std::map<std::int64_t, double>& p) {
    double e = 0.0;
    for (auto [k, c] : p) e -= (c / n) * std::log(c / n);
    return e;
  };
  const double ha = h(pa);
  const double hb = h(pb);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  double mi = 0.0;
  for (auto [key, c] : joint) {
    mi += (c / n) * std::log(c * n / (pa[key.first] * pb[key.second]));
  }
  return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

}  // namespace spamprop
