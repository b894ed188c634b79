#include "ldsort/initializers.hpp"
#include "ldsort/model.hpp"

#include "test_support.hpp"

#include <doctest.h>

using namespace ldsort;

namespace {

double empirical_std(const MatrixXd& m) {
  const double mean = m.mean();
  return std::sqrt((m.array() - mean).square().sum() / static_cast<double>(m.size() - 1));
}

SortingGameResult<double> fake_game(Index h, Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  SortingGameResult<double> g;
  g.dim = d;
  for (Index j = 0; j < h; ++j) {
    Hyperplane<double> p;
    p.w = VectorXd(d);
    for (Index k = 0; k < d; ++k) p.w(k) = normal(rng);
    p.w.normalize();
    p.b = normal(rng);
    p.class_id = static_cast<int>(j % 2);
    g.hyperplanes.push_back(p);
  }
  return g;
}

}  // namespace

TEST_CASE("orthogonal_init square and wide matrices have orthonormal rows") {
  for (auto [r, c] : {std::pair<Index, Index>{3, 3}, {2, 5}, {21, 784}}) {
    const MatrixXd w = orthogonal_init<double>(r, c, 17);
    CHECK(w.rows() == r);
    CHECK(w.cols() == c);
    CHECK((w * w.transpose() - MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("orthogonal_init tall matrices have orthonormal columns") {
  const MatrixXd w = orthogonal_init<double>(10, 4, 3);
  CHECK((w.transpose() * w - MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("initializers are bitwise deterministic per seed") {
  CHECK(orthogonal_init<double>(5, 7, 1) == orthogonal_init<double>(5, 7, 1));
  CHECK(orthogonal_init<double>(5, 7, 1) != orthogonal_init<double>(5, 7, 2));
  CHECK(xavier_normal_init<double>(5, 7, 1) == xavier_normal_init<double>(5, 7, 1));
  CHECK(he_normal_init<double>(5, 7, 1) == he_normal_init<double>(5, 7, 1));
}

TEST_CASE("xavier and he normal have the documented spread") {
  const MatrixXd x = xavier_normal_init<double>(1000, 1000, 5);
  CHECK(std::abs(empirical_std(x) / std::sqrt(2.0 / 2000.0) - 1.0) < 0.05);
  const MatrixXd h = he_normal_init<double>(1000, 1000, 6);
  CHECK(std::abs(empirical_std(h) / std::sqrt(2.0 / 1000.0) - 1.0) < 0.05);
  // With one row and one column Xavier's sigma is 1; with two columns He's sigma is 1. The
  // draw is the generator's first standard normal.
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal;
  const double first = normal(rng);
  CHECK(xavier_normal_init<double>(1, 1, 9)(0, 0) == doctest::Approx(first));
  CHECK(he_normal_init<double>(1, 2, 9)(0, 0) == doctest::Approx(first));
}

TEST_CASE("random_init refuses the sorting-game scheme") {
  CHECK_THROWS_AS(random_init<double>(InitScheme::SortingGame, 2, 2, 0), Error);
}

TEST_CASE("sorting_game_layer maps a single hyperplane directly") {
  SortingGameResult<double> g;
  g.dim = 2;
  Hyperplane<double> p;
  p.w = VectorXd(2);
  p.w << 1, 0;
  p.b = 0.5;
  g.hyperplanes.push_back(p);
  const auto init = sorting_game_layer<double>(g, 0, 0);
  REQUIRE(init.weights.rows() == 1);
  CHECK(init.weights(0, 0) == 1.0);
  CHECK(init.weights(0, 1) == 0.0);
  CHECK(init.bias(0) == -0.5);
}

TEST_CASE("sorting_game_layer pads with orthogonal rows and zero biases") {
  const auto g = fake_game(28, 784, 1);
  const auto init = sorting_game_layer<double>(g, 4, 11);
  REQUIRE(init.weights.rows() == 140);
  REQUIRE(init.weights.cols() == 784);
  for (Index j = 0; j < 28; ++j) {
    CHECK(init.weights.row(j) == g.hyperplanes[static_cast<std::size_t>(j)].w.transpose());
    CHECK(init.bias(j) == -g.hyperplanes[static_cast<std::size_t>(j)].b);
    CHECK(std::abs(init.weights.row(j).norm() - 1.0) < 1e-12);
  }
  CHECK(init.bias.tail(112).isZero(0.0));
  const MatrixXd extra = init.weights.bottomRows(112);
  CHECK((extra * extra.transpose() - MatrixXd::Identity(112, 112)).cwiseAbs().maxCoeff() < 1e-8);

  const auto other = sorting_game_layer<double>(g, 4, 12);
  CHECK(other.weights.topRows(28) == init.weights.topRows(28));
  CHECK(other.weights.bottomRows(112) != init.weights.bottomRows(112));
}

TEST_CASE("sorting_game_layer rejects mixed dimensions and empty results") {
  auto g = fake_game(3, 4, 2);
  g.hyperplanes[2].w = VectorXd::Ones(5);
  CHECK_THROWS_AS(sorting_game_layer<double>(g, 0, 0), Error);
  CHECK_THROWS_AS(sorting_game_layer<double>(SortingGameResult<double>{}, 0, 0), Error);
}

TEST_CASE("build_network with sorting-game init: seed moves only random rows and deeper layers") {
  const auto g = fake_game(6, 10, 3);
  Architecture arch{10, {0}, 4, Activation::Sigmoid};
  InitSpec a{InitScheme::SortingGame, &g, 1, 100, std::nullopt};
  InitSpec b = a;
  b.rng_seed = 101;
  const auto na = build_network<double>(arch, a);
  const auto nb = build_network<double>(arch, b);
  REQUIRE(na.layers.size() == 2);
  CHECK(na.layers[0].outputs() == 12);
  CHECK(na.layers[0].weights.topRows(6) == nb.layers[0].weights.topRows(6));
  CHECK(na.layers[0].bias == nb.layers[0].bias);
  CHECK(na.layers[0].weights.bottomRows(6) != nb.layers[0].weights.bottomRows(6));
  CHECK(na.layers[1].weights != nb.layers[1].weights);
  CHECK(na.layers[1].activation == Activation::SoftmaxOutput);
  CHECK(na.layers[1].bias.isZero(0.0));
}

TEST_CASE("build_network checks widths and hyperplane dimension") {
  const auto g = fake_game(6, 10, 3);
  InitSpec spec{InitScheme::SortingGame, &g, 0, 0, std::nullopt};
  CHECK_THROWS_AS(build_network<double>(Architecture{10, {7}, 4, Activation::Sigmoid}, spec), Error);
  CHECK_NOTHROW(build_network<double>(Architecture{10, {6}, 4, Activation::Sigmoid}, spec));
  try {
    build_network<double>(Architecture{11, {0}, 4, Activation::Sigmoid}, spec);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("build_network with a random scheme initializes every layer from it") {
  Architecture arch{8, {5, 3}, 2, Activation::ReLU};
  InitSpec spec{InitScheme::Orthogonal, nullptr, 0, 4, std::nullopt};
  const auto net = build_network<double>(arch, spec);
  REQUIRE(net.layers.size() == 3);
  for (std::size_t l = 0; l < 3; ++l) {
    const auto& w = net.layers[l].weights;
    CHECK(w == orthogonal_init<double>(w.rows(), w.cols(), mix_seed(4, l)));
  }
  CHECK(baseline_scheme(Activation::ReLU) == InitScheme::HeNormal);
  CHECK(baseline_scheme(Activation::Sigmoid) == InitScheme::Orthogonal);
}
