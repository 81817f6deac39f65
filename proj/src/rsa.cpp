#include "neurn/rsa.hpp"

#include "neurn/error.hpp"
#include "neurn/parallel.hpp"

#include <iomanip>
#include <map>
#include <sstream>

namespace neurn {

void require_same_shape(Eigen::Index ra, Eigen::Index ca, Eigen::Index rb, Eigen::Index cb) {
  if (ra != rb || ca != cb) {
    throw UsageError("rmse shape mismatch: " + std::to_string(ra) + "x" + std::to_string(ca) +
                     " vs " + std::to_string(rb) + "x" + std::to_string(cb));
  }
  if (ra * ca == 0) throw UsageError("rmse of empty maps");
}

Plane minmax_normalize(const Plane& p) {
  const double lo = p.minCoeff();
  const double hi = p.maxCoeff();
  if (!(hi > lo)) return Plane::Zero(p.rows(), p.cols());
  return (p.array() - lo) / (hi - lo);
}

Plane prepare_map(const Plane& p, const CompareOptions& opts) {
  Plane r = (p.rows() == opts.common_side && p.cols() == opts.common_side)
                ? p
                : resize_bilinear(p, opts.common_side, opts.common_side);
  return opts.normalize ? minmax_normalize(r) : r;
}

RmseMatrix compare_sets(const RepresentationSet& features, const RepresentationSet& neurals,
                        const CompareOptions& opts) {
  if (features.empty() || neurals.empty()) throw UsageError("compare_sets needs non-empty sets");
  if (opts.common_side <= 0) throw UsageError("common_side must be positive");
  features.validate();
  neurals.validate();

  std::vector<Plane> fa(features.size()), nb(neurals.size());
  parallel_for(fa.size(), [&](std::size_t i) { fa[i] = prepare_map(features.maps[i], opts); });
  parallel_for(nb.size(), [&](std::size_t j) { nb[j] = prepare_map(neurals.maps[j], opts); });

  RmseMatrix m;
  m.rows = features.meta;
  m.cols = neurals.meta;
  m.values.resize(Eigen::Index(fa.size()), Eigen::Index(nb.size()));
  parallel_for(fa.size(), [&](std::size_t i) {
    for (std::size_t j = 0; j < nb.size(); ++j) {
      m.values(Eigen::Index(i), Eigen::Index(j)) = rmse(fa[i], nb[j]);
    }
  });
  if (!m.values.allFinite()) throw NumericError("non-finite RMSE encountered");
  return m;
}

namespace {

bool all_have(const std::vector<Meta>& metas, const std::string& key) {
  if (metas.empty()) return false;
  for (const auto& m : metas) {
    if (!m.contains(key)) return false;
  }
  return true;
}

GroupSummary summarize(const std::string& key, const std::string& value,
                       const std::vector<double>& v) {
  GroupSummary g;
  g.key = key;
  g.value = value;
  g.count = v.size();
  double sum = 0.0;
  for (double x : v) sum += x;
  g.mean_rmse = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - g.mean_rmse) * (x - g.mean_rmse);
  g.std_rmse = std::sqrt(ss / static_cast<double>(v.size()));
  return g;
}

}  // namespace

std::vector<GroupSummary> aggregate(const RmseMatrix& m, const std::string& group_by) {
  std::map<std::string, std::vector<double>> groups;
  if (all_have(m.cols, group_by)) {
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
      auto& bucket = groups[m.cols[std::size_t(j)].at(group_by)];
      for (Eigen::Index i = 0; i < m.values.rows(); ++i) bucket.push_back(m.values(i, j));
    }
  } else if (all_have(m.rows, group_by)) {
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
      auto& bucket = groups[m.rows[std::size_t(i)].at(group_by)];
      for (Eigen::Index j = 0; j < m.values.cols(); ++j) bucket.push_back(m.values(i, j));
    }
  } else {
    throw UsageError("unknown group key '" + group_by + "'");
  }
  std::vector<GroupSummary> out;
  for (const auto& [value, v] : groups) {
    if (!v.empty()) out.push_back(summarize(group_by, value, v));
  }
  return out;
}

std::vector<ScatterPoint> neurn_scatter(const RmseMatrix& m_neurn, const RmseMatrix& m_plain,
                                        const std::string& group_by) {
  if (m_neurn.cols != m_plain.cols) {
    throw UsageError("NeuRN and plain matrices were computed against different neural sets");
  }
  const auto a = aggregate(m_neurn, group_by);
  const auto b = aggregate(m_plain, group_by);
  if (a.size() != b.size()) throw UsageError("NeuRN and plain matrices group differently");
  std::vector<ScatterPoint> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].value != b[i].value) throw UsageError("NeuRN and plain matrices group differently");
    out.push_back({a[i].value, b[i].mean_rmse, a[i].mean_rmse, a[i].mean_rmse < b[i].mean_rmse});
  }
  return out;
}

std::string meta_label(const Meta& m) {
  std::string s;
  for (const auto& [k, v] : m) {
    if (!s.empty()) s += ';';
    s += k + '=' + v;
  }
  return s;
}

namespace {
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}
}  // namespace

void write_matrix_csv(std::ostream& out, const RmseMatrix& m) {
  out << "row,col,rmse\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
      out << csv_field(meta_label(m.rows[std::size_t(i)])) << ','
          << csv_field(meta_label(m.cols[std::size_t(j)])) << ',' << m.values(i, j) << '\n';
    }
  }
}

void write_summary_csv(std::ostream& out, const std::vector<GroupSummary>& groups) {
  out << "key,group,mean,std,count\n" << std::setprecision(17);
  for (const auto& g : groups) {
    out << csv_field(g.key) << ',' << csv_field(g.value) << ',' << g.mean_rmse << ','
        << g.std_rmse << ',' << g.count << '\n';
  }
}

void write_scatter_csv(std::ostream& out, const std::vector<ScatterPoint>& points) {
  out << "group,plain_mean_rmse,neurn_mean_rmse,below_diagonal\n" << std::setprecision(17);
  for (const auto& p : points) {
    out << csv_field(p.group) << ',' << p.plain_mean << ',' << p.neurn_mean << ','
        << (p.below_diagonal ? "true" : "false") << '\n';
  }
}

}  // namespace neurn
