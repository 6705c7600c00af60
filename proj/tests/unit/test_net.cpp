#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "activetrack/errors.hpp"
#include "activetrack/net.hpp"
#include "oracles.hpp"

using namespace activetrack;

namespace {

std::vector<float> random_image(const NetConfig& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> img(static_cast<size_t>(c.in_width) * c.in_height * c.in_channels);
  for (auto& v : img) v = u(rng);
  return img;
}

}  // namespace

TEST_CASE("layer geometry for the full-size input") {
  NetConfig c;
  CHECK(c.conv1_width() == 20);
  CHECK(c.conv1_height() == 20);
  CHECK(c.conv2_width() == 9);
  CHECK(c.flat_size() == 2592);
  NetworkParams p(c);
  CHECK(p.info("fc.weight").shape == std::vector<int>{256, 2592});
  CHECK(p.info("conv1.weight").shape == std::vector<int>{16, 3, 8, 8});

  NetConfig bad = c;
  bad.in_width = 6;
  CHECK_THROWS_AS(bad.validate(), ShapeMismatch);
}

TEST_CASE("zero parameters give a uniform policy and zero value") {
  NetConfig c = oracle::tiny_config(ActionSpace::kDiscrete6);
  NetworkParams p(c);
  std::mt19937_64 rng(1);
  const PolicyOutput out = forward(p, random_image(c, rng), RecurrentState::zeros(c.lstm));
  for (double q : out.probs) CHECK(q == doctest::Approx(1.0 / 6.0));
  CHECK(out.value == 0.0);
  CHECK(entropy(out) == doctest::Approx(std::log(6.0)));
}

TEST_CASE("forward is deterministic and checks shapes") {
  NetConfig c = oracle::tiny_config(ActionSpace::kDiscrete9);
  const NetworkParams p = init_params(c, 4);
  std::mt19937_64 rng(2);
  const auto img = random_image(c, rng);
  const auto rec = RecurrentState::zeros(c.lstm);
  CHECK(forward(p, img, rec) == forward(p, img, rec));
  CHECK(init_params(c, 4) == p);
  CHECK_THROWS_AS(forward(p, std::vector<float>(5), rec), ShapeMismatch);
  CHECK_THROWS_AS(forward(p, img, RecurrentState::zeros(c.lstm + 1)), ShapeMismatch);
}

TEST_CASE("gradients match central finite differences on a 4-step rollout") {
  for (ActionSpace space : {ActionSpace::kDiscrete6, ActionSpace::kContinuous2}) {
    CAPTURE(to_string(space));
    const NetConfig c = oracle::tiny_config(space);
    std::mt19937_64 rng(17);
    const NetworkParams p = oracle::random_params(c, rng);
    const auto rollout = oracle::random_rollout(c, 4, rng);
    RecurrentState rec = RecurrentState::zeros(c.lstm);
    for (auto& v : rec.h) v = 0.3 * std::sin(v + 1.0);
    for (auto& v : rec.c) v = -0.2;
    for (const auto& r : oracle::finite_difference_check(p, rollout, rec, 1e-4, 1e-3)) {
      CAPTURE(r.name);
      CAPTURE(r.worst_rel);
      CHECK(r.failures == 0);
    }
  }
}

TEST_CASE("zero loss weights give a zero gradient") {
  const NetConfig c = oracle::tiny_config(ActionSpace::kDiscrete6);
  std::mt19937_64 rng(3);
  const NetworkParams p = oracle::random_params(c, rng);
  auto rollout = oracle::random_rollout(c, 3, rng);
  for (auto& s : rollout) s.target = {};
  const NetworkParams g = backward(p, rollout, RecurrentState::zeros(c.lstm));
  for (double v : g.data()) CHECK(v == 0.0);
}

TEST_CASE("entropy gradient vanishes at the uniform policy") {
  const NetConfig c = oracle::tiny_config(ActionSpace::kDiscrete6);
  NetworkParams p(c);  // zero weights: logits are all zero
  std::mt19937_64 rng(4);
  auto rollout = oracle::random_rollout(c, 2, rng);
  for (auto& s : rollout) s.target = {0.0, 1.0, 0.0, 0.0};
  const NetworkParams g = backward(p, rollout, RecurrentState::zeros(c.lstm));
  for (double v : g.block("actor.bias")) CHECK(std::abs(v) < 1e-15);
  for (double v : g.data()) CHECK(std::abs(v) < 1e-15);
}

TEST_CASE("sampling") {
  std::mt19937_64 rng(9);
  PolicyOutput det;
  det.space = ActionSpace::kDiscrete6;
  det.probs = {1, 0, 0, 0, 0, 0};
  det.logits = {0, -1e9, -1e9, -1e9, -1e9, -1e9};
  for (int k = 0; k < 1000; ++k) CHECK(sample_action(det, rng).index == 0);

  PolicyOutput cont;
  cont.space = ActionSpace::kContinuous2;
  cont.mean = {1.0, -1.0};
  cont.std = {kMinStd, kMinStd};
  for (int k = 0; k < 100; ++k) {
    const Action a = sample_action(cont, rng);
    CHECK(a.linear == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(a.angular == doctest::Approx(-1.0).epsilon(1e-3));
    CHECK(std::abs(a.linear) <= 1.0);
  }

  PolicyOutput cat;
  cat.space = ActionSpace::kDiscrete6;
  cat.probs = {0.05, 0.1, 0.15, 0.2, 0.25, 0.25};
  for (double q : cat.probs) cat.logits.push_back(std::log(q));
  const int n = 100000;
  std::vector<int> counts(6, 0);
  for (int k = 0; k < n; ++k) ++counts[sample_action(cat, rng).index];
  for (int i = 0; i < 6; ++i) {
    const double q = cat.probs[i];
    const double sigma = std::sqrt(n * q * (1 - q));
    CHECK(std::abs(counts[i] - n * q) < 3 * sigma);
  }
}

TEST_CASE("saliency is a normalised deterministic map") {
  const NetConfig c = oracle::tiny_config(ActionSpace::kDiscrete6);
  std::mt19937_64 rng(5);
  const NetworkParams p = oracle::random_params(c, rng);
  const auto img = random_image(c, rng);
  const auto rec = RecurrentState::zeros(c.lstm);
  const Action a = Action::discrete(ActionSpace::kDiscrete6, 2);
  const auto m = saliency(p, img, rec, a);
  REQUIRE(m.size() == static_cast<size_t>(c.in_width * c.in_height));
  double mx = 0.0;
  for (double v : m) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    mx = std::max(mx, v);
  }
  CHECK(mx == doctest::Approx(1.0));
  CHECK(saliency(p, img, rec, a) == m);
}

TEST_CASE("checkpoint round trip and corruption") {
  const NetConfig c = oracle::tiny_config(ActionSpace::kContinuous2);
  const NetworkParams p = init_params(c, 12);
  auto bytes = serialize_checkpoint(p);
  const NetworkParams back = deserialize_checkpoint(bytes);
  CHECK(back.config() == c);
  for (size_t i = 0; i < p.size(); ++i)
    CHECK(back.data()[i] == static_cast<double>(static_cast<float>(p.data()[i])));
  CHECK(serialize_checkpoint(back) == bytes);

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(deserialize_checkpoint(trailing), FormatError);
  auto truncated = bytes;
  truncated.resize(truncated.size() / 2);
  CHECK_THROWS_AS(deserialize_checkpoint(truncated), FormatError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(magic), FormatError);

  const auto path = std::filesystem::temp_directory_path() / "activetrack_unit.ckpt";
  save_checkpoint(p, path.string());
  CHECK(serialize_checkpoint(load_checkpoint(path.string())) == bytes);
  std::filesystem::remove(path);
}
