#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "scda/adapter.hpp"
#include "scda/supcon.hpp"
#include "test_util.hpp"

using namespace scda;

namespace {

MatrixXd random_input(Rng& rng, Eigen::Index b, Eigen::Index d, double scale = 1.0) {
  MatrixXd z(b, d);
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index j = 0; j < d; ++j) z(i, j) = rng.normal(0.0, scale);
  return z;
}

double head_loss(const AdapterHead& head, const MatrixXd& z, const VectorXi& labels,
                 double tau) {
  return supcon_loss_unchecked(forward(head, z), labels, tau).loss;
}

}  // namespace

TEST_CASE("init_head shapes and determinism") {
  const AdapterHead linear = init_head(4, HeadShape::Linear, 0, 7);
  REQUIRE(linear.layers.size() == 1);
  CHECK(linear.layers[0].weight.rows() == 4);
  CHECK(linear.layers[0].weight.cols() == 4);
  CHECK(linear.layers[0].bias.size() == 4);
  CHECK((linear.layers[0].bias.array() == 0.0).all());
  CHECK(linear.layers[0].weight.allFinite());
  const double bound = std::sqrt(6.0 / 8.0);
  CHECK(linear.layers[0].weight.cwiseAbs().maxCoeff() <= bound);

  const AdapterHead again = init_head(4, HeadShape::Linear, 0, 7);
  CHECK((again.layers[0].weight.array() == linear.layers[0].weight.array()).all());
  const AdapterHead other = init_head(4, HeadShape::Linear, 0, 8);
  CHECK((other.layers[0].weight.array() != linear.layers[0].weight.array()).any());

  const AdapterHead mlp = init_head(4, HeadShape::Mlp, 8, 7);
  REQUIRE(mlp.layers.size() == 2);
  CHECK(mlp.layers[0].weight.rows() == 8);
  CHECK(mlp.layers[0].weight.cols() == 4);
  CHECK(mlp.layers[1].weight.rows() == 4);
  CHECK(mlp.layers[1].weight.cols() == 8);

  CHECK_THROWS_MATCHES(init_head(1, HeadShape::Linear, 0, 0), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::BadDimension;
                       }));
}

TEST_CASE("identity head is a no-op on unit rows") {
  AdapterHead head;
  head.layers.push_back({MatrixXd::Identity(3, 3), VectorXd::Zero(3)});
  MatrixXd z(2, 3);
  z << 1, 0, 0, 0, 0.6, 0.8;
  const MatrixXd c = forward(head, z);
  CHECK((c - z).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forward output rows are unit norm and deterministic") {
  Rng rng(5);
  const AdapterHead head = init_head(6, HeadShape::Mlp, 9, 3);
  const MatrixXd z = random_input(rng, 11, 6, 2.0);
  const MatrixXd c1 = forward(head, z);
  const MatrixXd c2 = forward(head, z);
  REQUIRE((c1.array() == c2.array()).all());
  for (Eigen::Index i = 0; i < c1.rows(); ++i)
    CHECK(std::abs(c1.row(i).norm() - 1.0) <= 1e-9);
}

TEST_CASE("forward rejects collapsed rows and bad shapes") {
  AdapterHead zero_head;
  zero_head.layers.push_back({MatrixXd::Zero(3, 3), VectorXd::Zero(3)});
  MatrixXd z(1, 3);
  z << 1, 2, 3;
  CHECK_THROWS_MATCHES(forward(zero_head, z), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::ZeroOutput;
                       }));

  const AdapterHead head = init_head(4, HeadShape::Linear, 0, 0);
  MatrixXd wrong(2, 5);
  wrong.setOnes();
  CHECK_THROWS_MATCHES(forward(head, wrong), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::ShapeMismatch;
                       }));
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  Rng rng(9);
  const AdapterHead head = init_head(5, HeadShape::Mlp, 7, 1);
  const MatrixXd z = random_input(rng, 4, 5);
  const HeadGradients grads = backward(head, z, MatrixXd::Zero(4, 5));
  for (const auto& layer : grads.layers) {
    CHECK((layer.weight.array() == 0.0).all());
    CHECK((layer.bias.array() == 0.0).all());
  }
}

TEST_CASE("parameter gradients match finite differences end to end") {
  Rng rng(13);
  for (const HeadShape shape : {HeadShape::Linear, HeadShape::Mlp}) {
    AdapterHead head = init_head(4, shape, 5, 21);
    const MatrixXd z = random_input(rng, 3, 4);
    VectorXi labels(3);
    labels << 0, 0, 1;
    const double tau = 0.2;

    const ForwardCache cache = forward_cached(head, z);
    const LossResult loss = supcon_loss_unchecked(cache.output, labels, tau);
    const HeadGradients grads = backward(head, cache, loss.grad);

    const double h = 1e-5;
    for (std::size_t l = 0; l < head.layers.size(); ++l) {
      MatrixXd fd_w(head.layers[l].weight.rows(), head.layers[l].weight.cols());
      for (Eigen::Index i = 0; i < fd_w.rows(); ++i)
        for (Eigen::Index j = 0; j < fd_w.cols(); ++j) {
          const double orig = head.layers[l].weight(i, j);
          head.layers[l].weight(i, j) = orig + h;
          const double hi = head_loss(head, z, labels, tau);
          head.layers[l].weight(i, j) = orig - h;
          const double lo = head_loss(head, z, labels, tau);
          head.layers[l].weight(i, j) = orig;
          fd_w(i, j) = (hi - lo) / (2.0 * h);
        }
      REQUIRE(testutil::max_rel_err(grads.layers[l].weight, fd_w) < 1e-4);

      MatrixXd fd_b(head.layers[l].bias.size(), 1);
      for (Eigen::Index i = 0; i < fd_b.rows(); ++i) {
        const double orig = head.layers[l].bias[i];
        head.layers[l].bias[i] = orig + h;
        const double hi = head_loss(head, z, labels, tau);
        head.layers[l].bias[i] = orig - h;
        const double lo = head_loss(head, z, labels, tau);
        head.layers[l].bias[i] = orig;
        fd_b(i, 0) = (hi - lo) / (2.0 * h);
      }
      REQUIRE(testutil::max_rel_err(MatrixXd(grads.layers[l].bias), fd_b) < 1e-4);
    }
  }
}

TEST_CASE("duplicating the single batch row exactly doubles parameter gradients") {
  const AdapterHead head = init_head(4, HeadShape::Mlp, 6, 2);
  MatrixXd z(1, 4);
  z << 0.5, -0.25, 1.5, 0.75;
  MatrixXd g(1, 4);
  g << 0.125, 0.5, -0.75, 0.25;

  const HeadGradients single = backward(head, z, g);
  MatrixXd z2(2, 4), g2(2, 4);
  z2 << z, z;
  g2 << g, g;
  const HeadGradients doubled = backward(head, z2, g2);
  for (std::size_t l = 0; l < single.layers.size(); ++l) {
    CHECK((doubled.layers[l].weight.array() == (2.0 * single.layers[l].weight).array()).all());
    CHECK((doubled.layers[l].bias.array() == (2.0 * single.layers[l].bias).array()).all());
  }
}

TEST_CASE("head serialization round trip") {
  testutil::TempDir dir("head");
  const AdapterHead head = init_head(6, HeadShape::Mlp, 4, 77);
  const auto path = dir.path / "head.scdh";
  save_head(path, head);
  const AdapterHead back = load_head(path);
  REQUIRE(back.layers.size() == head.layers.size());
  for (std::size_t l = 0; l < head.layers.size(); ++l) {
    CHECK((back.layers[l].weight - head.layers[l].weight).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(back.layers[l].weight.rows() == head.layers[l].weight.rows());
  }
  // float32 payload: saving the loaded head reproduces the bytes.
  const auto path2 = dir.path / "head2.scdh";
  save_head(path2, back);
  CHECK(detail::read_file(path) == detail::read_file(path2));

  std::string bytes = detail::read_file(path);
  bytes[0] = 'Y';
  detail::write_file(path, bytes);
  CHECK_THROWS_MATCHES(load_head(path), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::BadMagic;
                       }));
}

TEST_CASE("transform is identical for any thread count") {
  Rng rng(41);
  const AdapterHead head = init_head(6, HeadShape::Mlp, 9, 12);
  MatrixRf z(31, 6);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = static_cast<float>(rng.normal());
  const MatrixXd serial = transform_embeddings(head, z);
  for (const char* threads : {"1", "3", "8"}) {
    setenv("SCDA_THREADS", threads, 1);
    const MatrixXd parallel = transform_embeddings(head, z);
    CHECK((parallel.array() == serial.array()).all());
  }
  unsetenv("SCDA_THREADS");
}

TEST_CASE("transform keeps row order and provenance alignment") {
  Rng rng(31);
  const AdapterHead head = init_head(5, HeadShape::Linear, 0, 4);
  MatrixRf z(7, 5);
  for (Eigen::Index i = 0; i < 7; ++i)
    for (Eigen::Index j = 0; j < 5; ++j) z(i, j) = static_cast<float>(rng.normal());
  const MatrixXd c = transform_embeddings(head, z);
  REQUIRE(c.rows() == 7);
  for (Eigen::Index i = 0; i < 7; ++i) {
    CHECK(std::abs(c.row(i).norm() - 1.0) <= 1e-9);
    // Row-wise map: transforming any single row alone gives the same result.
    const MatrixXd single = transform_embeddings(head, MatrixRf(z.row(i)));
    CHECK((single.row(0).array() == c.row(i).array()).all());
  }
}
