#pragma once

#include "neurn/reprs.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

namespace neurn {

/// Root-mean-square difference of two equally shaped maps.
template <typename DerivedA, typename DerivedB>
double rmse(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b);

/// Pairwise RMSE, rows are feature maps and columns neural maps.
struct RmseMatrix {
  std::vector<Meta> rows;
  std::vector<Meta> cols;
  Eigen::MatrixXd values;
};

struct CompareOptions {
  int common_side = 28;
  bool normalize = true;  // per-map min-max to [0, 1]; constant maps become zero
};

/// Min-max rescale to [0, 1]; a constant map becomes all zeros.
Plane minmax_normalize(const Plane& p);

/// Resizes (and optionally normalizes) one map the way compare_sets does.
Plane prepare_map(const Plane& p, const CompareOptions& opts);

RmseMatrix compare_sets(const RepresentationSet& features, const RepresentationSet& neurals,
                        const CompareOptions& opts = {});

struct GroupSummary {
  std::string key;
  std::string value;
  double mean_rmse = 0.0;
  double std_rmse = 0.0;  // population standard deviation
  std::size_t count = 0;
};

/// Groups matrix entries by a metadata key, looked up on the neural
/// (column) side first and on the feature (row) side otherwise. Groups are
/// returned in lexicographic order of their value.
std::vector<GroupSummary> aggregate(const RmseMatrix& m, const std::string& group_by);

struct ScatterPoint {
  std::string group;
  double plain_mean = 0.0;
  double neurn_mean = 0.0;
  bool below_diagonal = false;  // NeuRN mean strictly lower than plain
};

std::vector<ScatterPoint> neurn_scatter(const RmseMatrix& m_neurn, const RmseMatrix& m_plain,
                                        const std::string& group_by);

// CSV writers. Doubles are written with 17 significant digits.
void write_matrix_csv(std::ostream& out, const RmseMatrix& m);
void write_summary_csv(std::ostream& out, const std::vector<GroupSummary>& groups);
void write_scatter_csv(std::ostream& out, const std::vector<ScatterPoint>& points);

/// Compact "k=v;k=v" rendering of a metadata record.
std::string meta_label(const Meta& m);

// ---------------------------------------------------------------------------

void require_same_shape(Eigen::Index ra, Eigen::Index ca, Eigen::Index rb, Eigen::Index cb);

template <typename DerivedA, typename DerivedB>
double rmse(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  require_same_shape(a.rows(), a.cols(), b.rows(), b.cols());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double d = static_cast<double>(b(i, j)) - static_cast<double>(a(i, j));
      sum += d * d;
    }
  }
  return std::sqrt(sum / static_cast<double>(a.size()));
}

}  // namespace neurn
