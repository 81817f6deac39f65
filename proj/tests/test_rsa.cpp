#include "neurn/error.hpp"
#include "neurn/rsa.hpp"
#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace neurn;
using testing_support::random_plane;

namespace {

std::vector<double> values(const Plane& p) { return {p.data(), p.data() + p.size()}; }

RepresentationSet tagged(const std::vector<Plane>& maps, const std::string& key, const std::vector<std::string>& tags) {
  RepresentationSet r;
  r.maps = maps;
  for (const auto& t : tags) r.meta.push_back({{key, t}});
  return r;
}

}  // namespace

TEST_CASE("rmse trivial values") {
  Rng rng(1);
  const Plane a = random_plane(rng, 4, 6);
  CHECK(rmse(a, a) == 0.0);
  CHECK(rmse(Plane::Zero(3, 7), Plane::Ones(3, 7)) == 1.0);
  CHECK_THROWS_AS(rmse(Plane::Zero(3, 7), Plane::Zero(7, 3)), UsageError);
}

TEST_CASE("rmse matches the direct formula and is symmetric") {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const Plane a = random_plane(rng, 7, 5, -3, 3), b = random_plane(rng, 7, 5, -3, 3);
    CHECK(std::abs(rmse(a, b) - oracle::rmse(values(a), values(b))) < 1e-14);
    CHECK(rmse(a, b) == rmse(b, a));
    const Plane c = random_plane(rng, 7, 5, -3, 3);
    CHECK(rmse(a, c) <= rmse(a, b) + rmse(b, c) + 1e-12);
  }
  const Eigen::MatrixXf fa = Eigen::MatrixXf::Ones(2, 2);
  CHECK(rmse(fa, Eigen::MatrixXf::Zero(2, 2)) == 1.0);
}

TEST_CASE("compare_sets shape contract and zero self-diagonal") {
  Rng rng(3);
  std::vector<Plane> maps;
  for (int i = 0; i < 4; ++i) maps.push_back(random_plane(rng, 5, 5));
  const auto set = tagged(maps, "g", {"a", "a", "b", "b"});
  const RmseMatrix self = compare_sets(set, set);
  CHECK(self.values.diagonal().cwiseAbs().maxCoeff() == 0.0);

  const auto one = tagged({maps[0]}, "g", {"x"});
  const auto three = tagged({maps[1], maps[2], maps[3]}, "g", {"a", "b", "c"});
  const RmseMatrix m = compare_sets(one, three);
  CHECK(m.values.rows() == 1);
  CHECK(m.values.cols() == 3);
  CHECK_THROWS_AS(compare_sets(RepresentationSet{}, three), UsageError);
}

TEST_CASE("compare_sets equals resize-then-rmse from the oracles") {
  Rng rng(4);
  const Plane small = random_plane(rng, 2, 2), big = random_plane(rng, 4, 4);
  CompareOptions opts;
  opts.common_side = 4;
  opts.normalize = false;
  const RmseMatrix m = compare_sets(tagged({small}, "k", {"f"}), tagged({big}, "k", {"n"}), opts);
  const auto up = oracle::bilinear(testing_support::to_grid(small), 4, 4);
  std::vector<double> flat;
  for (const auto& row : up) flat.insert(flat.end(), row.begin(), row.end());
  CHECK(std::abs(m.values(0, 0) - oracle::rmse(flat, values(big))) < 1e-14);
}

TEST_CASE("normalization makes RMSE scale-free and constant maps zero") {
  Rng rng(5);
  const Plane a = random_plane(rng, 6, 6);
  const Plane scaled = (10.0 * a.array() + 3.0).matrix();
  const RmseMatrix m = compare_sets(tagged({a}, "k", {"x"}), tagged({scaled}, "k", {"y"}));
  CHECK(m.values(0, 0) < 1e-12);
  CHECK(minmax_normalize(Plane::Constant(3, 3, 2.0)).isZero(0.0));
}

TEST_CASE("compare_sets is permutation equivariant") {
  Rng rng(6);
  std::vector<Plane> f, n;
  for (int i = 0; i < 4; ++i) f.push_back(random_plane(rng, 5, 5));
  for (int i = 0; i < 3; ++i) n.push_back(random_plane(rng, 7, 7));
  const auto base = compare_sets(tagged(f, "k", {"0", "1", "2", "3"}), tagged(n, "k", {"0", "1", "2"}));
  const auto perm = compare_sets(tagged({f[2], f[0], f[3], f[1]}, "k", {"2", "0", "3", "1"}),
                                 tagged({n[1], n[2], n[0]}, "k", {"1", "2", "0"}));
  const int fr[] = {2, 0, 3, 1}, nc[] = {1, 2, 0};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) CHECK(perm.values(i, j) == base.values(fr[i], nc[j]));
}

TEST_CASE("aggregate recomputes from raw entries") {
  Rng rng(7);
  std::vector<Plane> f, n;
  for (int i = 0; i < 3; ++i) f.push_back(random_plane(rng, 4, 4));
  for (int i = 0; i < 5; ++i) n.push_back(random_plane(rng, 4, 4));
  RepresentationSet feats = tagged(f, "model", {"m", "m", "m"});
  RepresentationSet neur = tagged(n, "cell_class", {"exc", "inh", "exc", "inh", "inh"});
  const RmseMatrix m = compare_sets(feats, neur);

  const auto by_class = aggregate(m, "cell_class");
  REQUIRE(by_class.size() == 2);
  CHECK(by_class[0].value == "exc");
  CHECK(by_class[0].count == 6);
  double sum = 0, ss = 0;
  for (int i = 0; i < 3; ++i) sum += m.values(i, 0) + m.values(i, 2);
  const double mean = sum / 6;
  for (int i = 0; i < 3; ++i) ss += std::pow(m.values(i, 0) - mean, 2) + std::pow(m.values(i, 2) - mean, 2);
  CHECK(std::abs(by_class[0].mean_rmse - mean) < 1e-12);
  CHECK(std::abs(by_class[0].std_rmse - std::sqrt(ss / 6)) < 1e-12);

  const auto single = aggregate(m, "model");
  REQUIRE(single.size() == 1);
  CHECK(std::abs(single[0].mean_rmse - m.values.mean()) < 1e-12);
  CHECK_THROWS_AS(aggregate(m, "nope"), UsageError);
}

TEST_CASE("groups of equal entries summarize identically") {
  RmseMatrix m;
  m.rows = {{}};
  m.cols = {{{"g", "a"}}, {{"g", "b"}}};
  m.values = Eigen::MatrixXd::Constant(1, 2, 0.4);
  const auto s = aggregate(m, "g");
  CHECK(s[0].mean_rmse == s[1].mean_rmse);
  CHECK(s[0].std_rmse == 0.0);
  CHECK(s[0].count == s[1].count);
}

TEST_CASE("exact-copy group scores lower than shuffled group") {
  Rng rng(8);
  std::vector<Plane> features, neural;
  std::vector<std::string> tags;
  for (int i = 0; i < 6; ++i) features.push_back(random_plane(rng, 8, 8));
  for (int i = 0; i < 6; ++i) {
    neural.push_back(features[std::size_t(i)]);
    tags.push_back("excitatory");
  }
  for (int i = 0; i < 6; ++i) {
    std::vector<double> px = values(features[std::size_t(i)]);
    rng.shuffle(px);
    neural.push_back(Eigen::Map<Plane>(px.data(), 8, 8));
    tags.push_back("inhibitory");
  }
  RepresentationSet f;
  f.maps = features;
  f.meta.assign(6, {{"model", "m"}});
  const RmseMatrix m = compare_sets(f, tagged(neural, "cell_class", tags));
  // Score each neural map against its best-matching feature map.
  const auto groups = aggregate(m, "cell_class");
  CHECK(groups[0].value == "excitatory");
  double exc_best = 0, inh_best = 0;
  for (int j = 0; j < 6; ++j) exc_best += m.values.col(j).minCoeff();
  for (int j = 6; j < 12; ++j) inh_best += m.values.col(j).minCoeff();
  CHECK(exc_best < inh_best);
  CHECK(groups[0].mean_rmse < groups[1].mean_rmse);
}

TEST_CASE("scatter flags") {
  RmseMatrix plain;
  plain.rows = {{}, {}};
  plain.cols = {{{"genotype", "Emx1"}}, {{"genotype", "Sst"}}};
  plain.values = Eigen::MatrixXd::Constant(2, 2, 0.5);
  plain.values(0, 1) = 0.7;
  auto same = neurn_scatter(plain, plain, "genotype");
  REQUIRE(same.size() == 2);
  for (const auto& p : same) {
    CHECK(p.plain_mean == p.neurn_mean);
    CHECK_FALSE(p.below_diagonal);
  }
  RmseMatrix better = plain;
  better.values.array() -= 0.1;
  for (const auto& p : neurn_scatter(better, plain, "genotype")) CHECK(p.below_diagonal);

  RmseMatrix other = plain;
  other.cols[0]["genotype"] = "Vip";
  CHECK_THROWS_AS(neurn_scatter(other, plain, "genotype"), UsageError);
}

TEST_CASE("csv writers") {
  RmseMatrix m;
  m.rows = {{{"model", "a"}, {"filter", "0"}}};
  m.cols = {{{"neuron_id", "n1"}}};
  m.values = Eigen::MatrixXd::Constant(1, 1, 0.1);
  std::ostringstream out;
  write_matrix_csv(out, m);
  CHECK(out.str() == "row,col,rmse\nfilter=0;model=a,neuron_id=n1,0.10000000000000001\n");

  std::ostringstream s;
  write_summary_csv(s, {{"cell_class", "excitatory", 0.25, 0.5, 3}});
  CHECK(s.str() == "key,group,mean,std,count\ncell_class,excitatory,0.25,0.5,3\n");

  std::ostringstream sc;
  write_scatter_csv(sc, {{"Emx1", 0.5, 0.4, true}});
  CHECK(sc.str() == "group,plain_mean_rmse,neurn_mean_rmse,below_diagonal\nEmx1,0.5,0.40000000000000002,true\n");
}
