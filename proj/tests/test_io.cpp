#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "vager/graph.hpp"
#include "vager/model_io.hpp"
#include "vager/rng.hpp"
#include "vager/transfer.hpp"
#include "vager/vager.hpp"

using namespace vager;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

EmbeddingModel trained_model(std::uint64_t seed) {
  Rng rng(seed);
  const int n = 6, p = 5;
  BaseWeights bw;
  AnalogyGraph g;
  bw.W.resize(n, p);
  g.A.resize(n, n);
  for (int i = 0; i < n; ++i) {
    bw.class_ids.push_back(i * 7);
    g.class_ids.push_back(i * 7);
    for (int j = 0; j < p; ++j) bw.W(i, j) = rng.next_gaussian();
  }
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = rng.next_gaussian();
  g.A = 0.5 * (m + m.transpose());
  VagerTrainConfig cfg;
  cfg.q = 3;
  cfg.max_outer_iters = 30;
  cfg.seed = seed;
  return train_vager(bw, g, cfg);
}

}  // namespace

TEST_CASE("model save/load round trip is bit-exact and idempotent") {
  const auto model = precompute_solver(trained_model(42));
  const auto p1 = temp_path("vager_m1.vagm");
  const auto p2 = temp_path("vager_m2.vagm");
  save_model(model, p1);
  const auto loaded = load_model(p1);
  save_model(loaded, p2);
  CHECK(slurp(p1) == slurp(p2));

  CHECK(loaded.class_ids == model.class_ids);
  CHECK((loaded.V - model.V).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.T - model.T).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(loaded.pinv_cache.has_value());
  CHECK((*loaded.pinv_cache - *model.pinv_cache).cwiseAbs().maxCoeff() == 0.0);
  fs::remove(p1);
  fs::remove(p2);
}

TEST_CASE("loaded model loss recomputes to stored metadata") {
  const auto model = trained_model(77);
  const auto path = temp_path("vager_m3.vagm");
  save_model(model, path);
  const auto loaded = load_model(path);
  const double recomputed =
      vager_loss(loaded.V, loaded.T, loaded.W, loaded.A, loaded.beta);
  CHECK(std::abs(recomputed - loaded.final_loss) < 1e-12);
  fs::remove(path);
}

TEST_CASE("model file integrity errors") {
  const auto model = trained_model(5);
  const auto path = temp_path("vager_m4.vagm");
  save_model(model, path);

  SUBCASE("truncated file") {
    const auto full = slurp(path);
    std::ofstream os(path, std::ios::binary);
    os.write(full.data(), static_cast<std::streamsize>(full.size() / 2));
    os.close();
    CHECK_THROWS_AS(load_model(path), data_error);
  }
  SUBCASE("bad magic") {
    auto full = slurp(path);
    full[0] = 'X';
    std::ofstream os(path, std::ios::binary);
    os.write(full.data(), static_cast<std::streamsize>(full.size()));
    os.close();
    CHECK_THROWS_AS(load_model(path), data_error);
  }
  SUBCASE("trailing bytes") {
    std::ofstream os(path, std::ios::binary | std::ios::app);
    os << "junk";
    os.close();
    CHECK_THROWS_AS(load_model(path), data_error);
  }
  fs::remove(path);
}

TEST_CASE("classifier file round trip") {
  std::vector<LinearClassifier> clfs(3);
  Rng rng(8);
  for (int i = 0; i < 3; ++i) {
    clfs[i].class_id = 100 + i;
    clfs[i].provenance = static_cast<Provenance>(i);
    clfs[i].w.resize(4);
    for (int j = 0; j < 4; ++j) clfs[i].w[j] = rng.next_gaussian();
  }
  const auto path = temp_path("vager_c.vagc");
  save_classifiers(clfs, path);
  const auto back = load_classifiers(path);
  REQUIRE(back.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(back[i].class_id == clfs[i].class_id);
    CHECK(back[i].provenance == clfs[i].provenance);
    CHECK((back[i].w - clfs[i].w).cwiseAbs().maxCoeff() == 0.0);
  }
  fs::remove(path);
}

TEST_CASE("cached solver survives the save/load round trip") {
  const auto model = precompute_solver(trained_model(31));
  const auto path = temp_path("vager_m5.vagm");
  save_model(model, path);
  const auto loaded = load_model(path);
  Rng rng(4);
  Eigen::VectorXd a(model.n());
  for (int i = 0; i < a.size(); ++i) a[i] = rng.next_gaussian();
  SimilarityVector sv;
  sv.a = a;
  sv.class_ids = model.class_ids;
  const auto e1 = infer_embedding(model, sv);
  const auto e2 = infer_embedding(loaded, sv);
  CHECK((e1.v - e2.v).cwiseAbs().maxCoeff() < 1e-12);
  fs::remove(path);
}
