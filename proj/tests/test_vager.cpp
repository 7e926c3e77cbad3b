#include <doctest.h>

#include <Eigen/QR>
#include <cmath>

#include "vager/rng.hpp"
#include "vager/vager.hpp"

using namespace vager;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, int r, int c) {
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.next_gaussian();
  return m;
}

Eigen::MatrixXd random_symmetric(Rng& rng, int n) {
  Eigen::MatrixXd m = random_matrix(rng, n, n);
  return 0.5 * (m + m.transpose());
}

// Central finite differences of the loss in every coordinate.
void finite_difference_check(const Eigen::MatrixXd& V, const Eigen::MatrixXd& T,
                             const Eigen::MatrixXd& W, const Eigen::MatrixXd& A,
                             double beta, double tol) {
  const double h = 1e-5;
  const auto g = vager_gradients(V, T, W, A, beta);
  double max_rel = 0.0;
  for (int i = 0; i < V.rows(); ++i)
    for (int j = 0; j < V.cols(); ++j) {
      Eigen::MatrixXd Vp = V, Vm = V;
      Vp(i, j) += h;
      Vm(i, j) -= h;
      const double fd =
          (vager_loss(Vp, T, W, A, beta) - vager_loss(Vm, T, W, A, beta)) /
          (2 * h);
      const double denom = std::max({std::abs(fd), std::abs(g.dV(i, j)), 1.0});
      max_rel = std::max(max_rel, std::abs(fd - g.dV(i, j)) / denom);
    }
  for (int i = 0; i < T.rows(); ++i)
    for (int j = 0; j < T.cols(); ++j) {
      Eigen::MatrixXd Tp = T, Tm = T;
      Tp(i, j) += h;
      Tm(i, j) -= h;
      const double fd =
          (vager_loss(V, Tp, W, A, beta) - vager_loss(V, Tm, W, A, beta)) /
          (2 * h);
      const double denom = std::max({std::abs(fd), std::abs(g.dT(i, j)), 1.0});
      max_rel = std::max(max_rel, std::abs(fd - g.dT(i, j)) / denom);
    }
  CHECK(max_rel < tol);
}

}  // namespace

TEST_CASE("vager_loss hand cases") {
  SUBCASE("all-zero case") {
    const Eigen::MatrixXd Z2 = Eigen::MatrixXd::Zero(2, 2);
    CHECK(vager_loss(Z2, Eigen::MatrixXd::Random(2, 2), Z2, Z2, 0.7) == 0.0);
  }
  SUBCASE("hand evaluation") {
    Eigen::MatrixXd V(2, 1), T(1, 1), W(2, 1);
    V << 1, 0;
    T << 2;
    W << 1, 1;
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2, 2);
    CHECK(vager_loss(V, T, W, A, 1.0) == doctest::Approx(3.0).epsilon(1e-14));
  }
  SUBCASE("beta = 0 isolates the fit term") {
    Rng rng(5);
    const auto V = random_matrix(rng, 4, 2);
    const auto T = random_matrix(rng, 2, 3);
    const auto W = random_matrix(rng, 4, 3);
    const auto A = random_symmetric(rng, 4);
    CHECK(vager_loss(V, T, W, A, 0.0) ==
          doctest::Approx((V * T - W).squaredNorm()).epsilon(1e-14));
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(vager_loss(Eigen::MatrixXd::Zero(2, 2),
                               Eigen::MatrixXd::Zero(3, 2),
                               Eigen::MatrixXd::Zero(2, 2),
                               Eigen::MatrixXd::Zero(2, 2), 1.0),
                    data_error);
  }
}

TEST_CASE("vager_gradients basics") {
  SUBCASE("zero V and W is stationary") {
    const Eigen::MatrixXd V = Eigen::MatrixXd::Zero(3, 2);
    const Eigen::MatrixXd W = Eigen::MatrixXd::Zero(3, 4);
    Rng rng(2);
    const auto T = random_matrix(rng, 2, 4);
    const Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, 3);
    const auto g = vager_gradients(V, T, W, A, 1.0);
    CHECK(g.dV.cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.dT.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("beta = 0 reduces dV to the fit term") {
    Rng rng(9);
    const auto V = random_matrix(rng, 5, 3);
    const auto T = random_matrix(rng, 3, 4);
    const auto W = random_matrix(rng, 5, 4);
    const auto A = random_symmetric(rng, 5);
    const auto g = vager_gradients(V, T, W, A, 0.0);
    const Eigen::MatrixXd expected = 2.0 * (V * T - W) * T.transpose();
    CHECK((g.dV - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("gradients match central finite differences on random instances") {
  Rng meta(2024);
  const double betas[] = {0.0, 0.5, 1.0};
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 3 + static_cast<int>(meta.next_below(10));   // <= 12
    const int q = 1 + static_cast<int>(meta.next_below(6));    // <= 6
    const int p = q + static_cast<int>(meta.next_below(
                          static_cast<std::uint64_t>(8 - q) + 1));  // <= 8
    Rng rng(derive_seed(777, rep));
    const auto V = random_matrix(rng, n, q);
    const auto T = random_matrix(rng, q, p);
    const auto W = random_matrix(rng, n, p);
    const auto A = random_symmetric(rng, n);
    finite_difference_check(V, T, W, A, betas[rep % 3], 1e-5);
  }
}

TEST_CASE("loss and gradients invariant under simultaneous permutation") {
  Rng rng(31);
  const int n = 6, q = 3, p = 4;
  const auto V = random_matrix(rng, n, q);
  const auto T = random_matrix(rng, q, p);
  const auto W = random_matrix(rng, n, p);
  const auto A = random_symmetric(rng, n);

  const auto perm = Rng(55).permutation(n);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) P(i, static_cast<int>(perm[i])) = 1.0;
  const Eigen::MatrixXd Vp = P * V, Wp = P * W, Ap = P * A * P.transpose();

  CHECK(std::abs(vager_loss(V, T, W, A, 0.8) -
                 vager_loss(Vp, T, Wp, Ap, 0.8)) < 1e-10);
  const auto g = vager_gradients(V, T, W, A, 0.8);
  const auto gp = vager_gradients(Vp, T, Wp, Ap, 0.8);
  CHECK((P * g.dV - gp.dV).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((g.dT - gp.dT).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("loss invariant under orthogonal rotation of the embedding") {
  Rng rng(13);
  const int n = 7, q = 4, p = 5;
  const auto V = random_matrix(rng, n, q);
  const auto T = random_matrix(rng, q, p);
  const auto W = random_matrix(rng, n, p);
  const auto A = random_symmetric(rng, n);
  const Eigen::MatrixXd R =
      Eigen::HouseholderQR<Eigen::MatrixXd>(random_matrix(rng, q, q))
          .householderQ();
  CHECK(std::abs(vager_loss(V, T, W, A, 1.0) -
                 vager_loss(V * R, R.transpose() * T, W, A, 1.0)) < 1e-10);
}

TEST_CASE("train_vager: monotone trace, determinism, planted solution") {
  Rng rng(64);
  const int n = 6;
  BaseWeights bw;
  AnalogyGraph graph;
  for (int i = 0; i < n; ++i) graph.class_ids.push_back(i);
  bw.class_ids = graph.class_ids;

  SUBCASE("loss trace non-increasing on random instances") {
    for (int rep = 0; rep < 3; ++rep) {
      bw.W = random_matrix(rng, n, n + 1);
      graph.A = random_symmetric(rng, n);
      VagerTrainConfig cfg;
      cfg.q = 3;
      cfg.max_outer_iters = 60;
      cfg.seed = rep;
      const auto model = train_vager(bw, graph, cfg);
      for (std::size_t i = 1; i < model.loss_trace.size(); ++i)
        CHECK(model.loss_trace[i] <= model.loss_trace[i - 1]);
    }
  }

  SUBCASE("deterministic given identical config") {
    bw.W = random_matrix(rng, n, n + 1);
    graph.A = random_symmetric(rng, n);
    VagerTrainConfig cfg;
    cfg.q = 3;
    cfg.max_outer_iters = 40;
    cfg.seed = 123;
    const auto m1 = train_vager(bw, graph, cfg);
    const auto m2 = train_vager(bw, graph, cfg);
    CHECK((m1.V - m2.V).cwiseAbs().maxCoeff() == 0.0);
    CHECK((m1.T - m2.T).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("planted instance reaches near-zero loss") {
    Rng prng(500);
    const Eigen::MatrixXd Vstar = random_matrix(prng, n, n);
    const Eigen::MatrixXd Tstar = random_matrix(prng, n, n + 1);
    graph.A = Vstar * Vstar.transpose();
    bw.W = Vstar * Tstar;
    VagerTrainConfig cfg;
    cfg.q = n;
    cfg.max_outer_iters = 4000;
    cfg.rel_tol = 1e-14;
    cfg.step_size = 0.05;
    cfg.seed = 9;
    const auto model = train_vager(bw, graph, cfg);
    CHECK(model.final_loss <= 1e-4);
  }
}
