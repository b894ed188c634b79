#include "ldsort/sorting_game.hpp"

#include "test_support.hpp"

#include <doctest.h>

using namespace ldsort;

namespace {

Flags to_flags(const std::vector<bool>& v) {
  Flags f(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) f(static_cast<Index>(i)) = v[i];
  return f;
}

std::pair<MatrixXd, std::vector<int>> separable_2d() {
  MatrixXd x(20, 2);
  std::vector<int> y(20);
  for (Index i = 0; i < 10; ++i) {
    x.row(i) << static_cast<double>(i % 3), static_cast<double>(i) * 0.5;
    x.row(10 + i) << 10.0 + static_cast<double>(i % 4), static_cast<double>(i) * 0.3 + 1.0;
    y[static_cast<std::size_t>(10 + i)] = 1;
  }
  return {x, y};
}

struct OracleCut {
  std::array<double, 2> w;
  double b;
};

// Straight-line 2-D version of the class loop with RemoveSorted: closed-form Fisher direction,
// exhaustive bias scan, and removal by rebuilding vectors.
std::vector<OracleCut> oracle_class_loop(const MatrixXd& x, const std::vector<int>& y, int class_id) {
  std::vector<std::array<double, 2>> pts;
  std::vector<int> labels = y;
  for (Index k = 0; k < x.rows(); ++k) pts.push_back({x(k, 0), x(k, 1)});
  std::vector<OracleCut> cuts;
  while (true) {
    std::vector<bool> flags;
    long pos = 0;
    for (int v : labels) {
      flags.push_back(v == class_id);
      pos += v == class_id;
    }
    const long neg = static_cast<long>(labels.size()) - pos;
    if (pos < 2 || neg < 2) break;
    MatrixXd cur(static_cast<Index>(pts.size()), 2);
    for (std::size_t k = 0; k < pts.size(); ++k) cur.row(static_cast<Index>(k)) << pts[k][0], pts[k][1];
    auto w = test::fisher_2x2(cur, flags, 1e-4);
    w = {-w[0], -w[1]};
    std::vector<double> z;
    for (const auto& p : pts) {
      double acc = 0;
      acc += p[0] * w[0];
      acc += p[1] * w[1];
      z.push_back(acc);
    }
    const auto best = test::brute_force_bias(z, flags);
    std::vector<std::array<double, 2>> kept;
    std::vector<int> kept_labels;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const bool sorted = (flags[k] && z[k] <= best.b) || (!flags[k] && z[k] > best.b);
      if (!sorted) {
        kept.push_back(pts[k]);
        kept_labels.push_back(labels[k]);
      }
    }
    if (kept.size() == pts.size()) break;
    cuts.push_back({w, best.b});
    pts = std::move(kept);
    labels = std::move(kept_labels);
  }
  return cuts;
}

}  // namespace

TEST_CASE("project onto an axis") {
  MatrixXd x(2, 2);
  x << 3, 7, -1, 2;
  VectorXd w(2);
  w << 1, 0;
  const VectorXd z = project<double>(x, w);
  CHECK(z(0) == 3.0);
  CHECK(z(1) == -1.0);
  VectorXd bad(3);
  bad.setZero();
  CHECK_THROWS_AS(project<double>(x, bad), Error);
}

TEST_CASE("project with a zero-padded block vector only sees block coordinates") {
  auto [x, y] = test::two_blobs(5, 4, 0.0, 1);
  VectorXd w = VectorXd::Zero(4);
  w(1) = 0.6;
  w(2) = 0.8;
  MatrixXd altered = x;
  altered.col(0).setRandom();
  altered.col(3).setRandom();
  CHECK(project<double>(x, w) == project<double>(altered, w));
}

TEST_CASE("project matches a scalar dot product exactly") {
  auto [x, y] = test::two_blobs(20, 7, 0.3, 2);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  VectorXd w(7);
  for (Index j = 0; j < 7; ++j) w(j) = normal(rng);
  const VectorXd z = project<double>(x, w);
  for (Index k = 0; k < x.rows(); ++k) {
    double acc = 0;
    for (Index j = 0; j < 7; ++j) acc += x(k, j) * w(j);
    CHECK(z(k) == acc);
  }
}

TEST_CASE("best_bias on separated values takes the midpoint") {
  VectorXd z(4);
  z << 1, 2, 3, 4;
  const auto c = best_bias<double>(z, to_flags({true, true, false, false}));
  CHECK(c.b == 2.5);
  CHECK(c.sorted_count == 4);
}

TEST_CASE("best_bias with all flags set takes max(z)") {
  VectorXd z(3);
  z << 5, 6, 7;
  const auto c = best_bias<double>(z, to_flags({true, true, true}));
  CHECK(c.b == 7.0);
  CHECK(c.sorted_count == 3);
}

TEST_CASE("best_bias with no flags set takes min(z) - 1") {
  VectorXd z(3);
  z << 5, 6, 7;
  const auto c = best_bias<double>(z, to_flags({false, false, false}));
  CHECK(c.b == 4.0);
  CHECK(c.sorted_count == 3);
}

TEST_CASE("best_bias prefers the smallest threshold on ties") {
  VectorXd z(4);
  z << 1, 2, 3, 4;
  // Thresholds 0, 2.5 and 4 all sort two points.
  const auto c = best_bias<double>(z, to_flags({false, true, false, true}));
  CHECK(c.sorted_count == 2);
  CHECK(c.b == 0.0);
}

TEST_CASE("best_bias agrees with the exhaustive scan on random inputs") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<Index>(1 + rng() % 64);
    VectorXd z(n);
    std::vector<bool> flags;
    std::uniform_int_distribution<int> small(-5, 5);
    std::normal_distribution<double> normal;
    const bool discrete = trial % 3 == 0;  // plenty of repeated values
    for (Index k = 0; k < n; ++k) {
      z(k) = discrete ? static_cast<double>(small(rng)) : normal(rng);
      flags.push_back(rng() % 2 == 0);
    }
    const auto got = best_bias<double>(z, to_flags(flags));
    const auto want = test::brute_force_bias(std::vector<double>(z.data(), z.data() + n), flags);
    REQUIRE(got.sorted_count == want.count);
    REQUIRE(got.b == want.b);
  }
}

TEST_CASE("best_bias rejects empty and mismatched input") {
  VectorXd z(0);
  CHECK_THROWS_AS(best_bias<double>(z, Flags(0)), Error);
  VectorXd z2(2);
  z2 << 1, 2;
  CHECK_THROWS_AS(best_bias<double>(z2, to_flags({true})), Error);
}

TEST_CASE("run_class on separable data uses one cut and sorts everything") {
  auto [x, y] = separable_2d();
  const auto game = run_class<double>(x, y, 0, GameConfig{});
  REQUIRE(game.hyperplanes.size() == 1);
  CHECK(game.remaining_rows.empty());
  const auto& h = game.hyperplanes[0];
  CHECK(h.sorted_count == 20);
  const VectorXd z = project<double>(x, h.w);
  for (Index k = 0; k < 20; ++k) CHECK((z(k) <= h.b) == (y[static_cast<std::size_t>(k)] == 0));
}

TEST_CASE("run_class with fewer than d target points returns nothing") {
  MatrixXd x(6, 3);
  x.setRandom();
  const std::vector<int> y{0, 0, 1, 1, 1, 1};
  const auto game = run_class<double>(x, y, 0, GameConfig{});
  CHECK(game.hyperplanes.empty());
  CHECK(game.removal_log.empty());
  CHECK(game.remaining_rows.size() == 6);
}

TEST_CASE("run_class matches a straight-line oracle on overlapping Gaussians") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto [x, y] = test::two_blobs(100, 2, 1.0, 40 + seed);
    for (int c = 0; c < 2; ++c) {
      const auto game = run_class<double>(x, y, c, GameConfig{});
      const auto oracle = oracle_class_loop(x, y, c);
      REQUIRE(game.hyperplanes.size() == oracle.size());
      for (std::size_t i = 0; i < oracle.size(); ++i) {
        CHECK(game.hyperplanes[i].w(0) == doctest::Approx(oracle[i].w[0]).epsilon(1e-9));
        CHECK(game.hyperplanes[i].w(1) == doctest::Approx(oracle[i].w[1]).epsilon(1e-9));
        CHECK(game.hyperplanes[i].b == doctest::Approx(oracle[i].b).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("run_class invariants: shrinking sets, unit directions, at least the base rate") {
  auto [x, y] = test::two_blobs(150, 3, 0.6, 77);
  for (auto mode : {RemovalMode::RemoveSorted, RemovalMode::RemoveLiteral}) {
    GameConfig cfg;
    cfg.removal_mode = mode;
    const auto game = run_class<double>(x, y, 1, cfg);
    REQUIRE(game.removal_log.size() == game.hyperplanes.size());
    Index previous = x.rows() + 1;
    for (std::size_t i = 0; i < game.removal_log.size(); ++i) {
      const auto& r = game.removal_log[i];
      CHECK(r.points_removed >= 1);
      CHECK(r.points_before < previous);
      previous = r.points_before;
      CHECK(r.iteration == static_cast<int>(i));
      CHECK(std::abs(game.hyperplanes[i].w.norm() - 1.0) < 1e-12);
    }
    // Base-rate bound checked by replaying the loop on the recorded rows.
    std::vector<Index> rows(static_cast<std::size_t>(x.rows()));
    std::iota(rows.begin(), rows.end(), Index{0});
    for (const auto& h : game.hyperplanes) {
      long pos = 0;
      for (Index r : rows) pos += y[static_cast<std::size_t>(r)] == 1;
      const long neg = static_cast<long>(rows.size()) - pos;
      CHECK(h.sorted_count >= std::max(pos, neg));
      std::vector<Index> kept;
      for (Index r : rows) {
        double z = 0;
        for (Index j = 0; j < 3; ++j) z += x(r, j) * h.w(j);
        const bool flag = y[static_cast<std::size_t>(r)] == 1;
        const bool low = z <= h.b;
        const bool sorted = (flag && low) || (!flag && !low);
        const bool removed = mode == RemovalMode::RemoveSorted ? sorted : !sorted;
        if (!removed) kept.push_back(r);
      }
      rows = std::move(kept);
    }
    CHECK(rows == game.remaining_rows);
  }
}

TEST_CASE("run_class rejects an absent class and too many blocks") {
  auto [x, y] = separable_2d();
  try {
    run_class<double>(x, y, 5, GameConfig{});
    FAIL("expected UnknownClass");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownClass);
  }
  GameConfig cfg;
  cfg.n_blocks = 3;
  CHECK_THROWS_AS(run_class<double>(x, y, 0, cfg), Error);
  cfg.n_blocks = 1;
  cfg.sample_fraction = 0.0;
  CHECK_THROWS_AS(run_class<double>(x, y, 0, cfg), Error);
}

TEST_CASE("run_game on separable two-class data yields one hyperplane per class") {
  auto [x, y] = separable_2d();
  const auto result = run_game<double>(x, y, 2, GameConfig{});
  REQUIRE(result.hyperplanes.size() == 2);
  CHECK(result.hyperplanes[0].class_id == 0);
  CHECK(result.hyperplanes[1].class_id == 1);
  CHECK(result.per_class_counts.at(0) == 1);
  CHECK(result.per_class_counts.at(1) == 1);
  CHECK(result.dim == 2);
}

TEST_CASE("run_game runs every class on the full data") {
  auto [x, y] = test::two_blobs(60, 2, 1.2, 9);
  const auto result = run_game<double>(x, y, 2, GameConfig{});
  const auto c1 = run_class<double>(x, y, 1, GameConfig{});
  std::vector<Hyperplane<double>> tail;
  for (const auto& h : result.hyperplanes) {
    if (h.class_id == 1) tail.push_back(h);
  }
  REQUIRE(tail.size() == c1.hyperplanes.size());
  for (std::size_t i = 0; i < tail.size(); ++i) CHECK(tail[i].w == c1.hyperplanes[i].w);
}

TEST_CASE("run_game is deterministic including subsampling and permuted blocks") {
  auto [x, y] = test::two_blobs(120, 6, 0.5, 12);
  GameConfig cfg;
  cfg.sample_fraction = 0.5;
  cfg.n_blocks = 2;
  cfg.permute_blocks = true;
  cfg.rng_seed = 31;
  const auto a = run_game<double>(x, y, 2, cfg);
  const auto b = run_game<double>(x, y, 2, cfg);
  REQUIRE(a.hyperplanes.size() == b.hyperplanes.size());
  for (std::size_t i = 0; i < a.hyperplanes.size(); ++i) {
    CHECK(a.hyperplanes[i].w == b.hyperplanes[i].w);
    CHECK(a.hyperplanes[i].b == b.hyperplanes[i].b);
  }
}

TEST_CASE("blockwise iterations emit one hyperplane per block with a shared iteration index") {
  auto [x, y] = test::two_blobs(80, 4, 1.0, 21);
  GameConfig cfg;
  cfg.n_blocks = 2;
  const auto game = run_class<double>(x, y, 0, cfg);
  REQUIRE(!game.hyperplanes.empty());
  CHECK(game.hyperplanes.size() >= 2);
  CHECK(game.hyperplanes[0].iteration == 0);
  CHECK(game.hyperplanes[1].iteration == 0);
  CHECK(game.hyperplanes[0].w.tail(2).isZero(0.0));
  CHECK(game.hyperplanes[1].w.head(2).isZero(0.0));
}

TEST_CASE("subsampling only affects the direction; bias search uses every current point") {
  auto [x, y] = test::two_blobs(100, 2, 1.0, 55);
  GameConfig cfg;
  cfg.sample_fraction = 0.3;
  cfg.rng_seed = 4;
  const auto game = run_class<double>(x, y, 0, cfg);
  REQUIRE(!game.hyperplanes.empty());
  const auto& h = game.hyperplanes[0];
  const VectorXd z = project<double>(x, h.w);
  std::vector<bool> flags;
  for (int v : y) flags.push_back(v == 0);
  const auto want = test::brute_force_bias(std::vector<double>(z.data(), z.data() + z.size()), flags);
  CHECK(h.b == want.b);
  CHECK(h.sorted_count == want.count);
}

TEST_CASE("run_game rejects labels out of range") {
  auto [x, y] = separable_2d();
  y[0] = 2;
  CHECK_THROWS_AS(run_game<double>(x, y, 2, GameConfig{}), Error);
}
