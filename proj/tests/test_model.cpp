#include "apf/model.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace apf;
using apf::test::at;
using apf::test::cube;
using apf::test::stack;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Central differences of the loss, one coordinate at a time.
Eigen::VectorXd numeric_grad(const GnnParamsd& params, std::span<const EncodedItem> items, const ModelConfig& cfg,
                             double h = 1e-5) {
  GnnParamsd p = params;
  Eigen::VectorXd g(p.flat().size());
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double orig = p.flat()(k);
    p.flat()(k) = orig + h;
    const double up = bce_loss(p, items, cfg);
    p.flat()(k) = orig - h;
    const double down = bce_loss(p, items, cfg);
    p.flat()(k) = orig;
    g(k) = (up - down) / (2 * h);
  }
  return g;
}

std::vector<Block> blocks(std::uint64_t seed, std::size_t n = 8) {
  Rng rng(seed);
  return sample_block_set(rng, n);
}

}  // namespace

TEST_CASE("make_edges") {
  CHECK(make_edges(Connectivity::TGN, 1).empty());
  CHECK(make_edges(Connectivity::FCGN, 1).empty());
  const auto tgn = make_edges(Connectivity::TGN, 4);
  CHECK(tgn.size() == 6);
  for (auto [s, r] : tgn) CHECK(s < r);
  const auto fc = make_edges(Connectivity::FCGN, 4);
  CHECK(fc.size() == 12);
  CHECK(std::set<std::pair<int, int>>(fc.begin(), fc.end()).size() == 12);
  for (auto [s, r] : fc) CHECK(s != r);
}

TEST_CASE("encode") {
  Block b = cube(0);
  b.dims = {0.05, 0.1, 0.12};
  b.com_offset = {0.01, 0.0, 0.0};
  b.mass = 0.7;
  const Eigen::MatrixXd f = encode(stack({at(cube(1), 0.0), at(b, 0.02, -0.01, Yaw::k90)}));
  REQUIRE(f.rows() == kNodeFeatures);
  REQUIRE(f.cols() == 2);
  const Eigen::VectorXd c = f.col(1);
  CHECK(c(0) == doctest::Approx(1.0));
  CHECK(c(1) == doctest::Approx(0.5));
  CHECK(c(2) == doctest::Approx(1.2));
  CHECK(c(3) == doctest::Approx(0.0));
  CHECK(c(4) == doctest::Approx(0.1));
  CHECK(c(6) == doctest::Approx(0.7));
  CHECK(c(7) == doctest::Approx(0.2));
  CHECK(c(8) == doctest::Approx(-0.1));
  CHECK(c.tail<4>() == Eigen::Vector4d(0, 1, 0, 0));
}

TEST_CASE("GnnParams layout covers the flat vector exactly") {
  Rng rng(1);
  auto p = GnnParamsd::glorot(8, rng);
  CHECK(p.flat().size() == GnnParamsd::size_for(8));
  CHECK(&p.out_b() == p.flat().data() + p.flat().size() - 1);
  CHECK(p.enc_b().isZero());
  CHECK(p.msg_b().isZero());
  CHECK(p.upd_b().isZero());
  CHECK(p.out_b() == 0.0);
  CHECK(p.enc_w().cwiseAbs().maxCoeff() <= std::sqrt(6.0 / (8 + kNodeFeatures)));
  CHECK(p.finite());
  Rng a(5), b(5);
  CHECK(GnnParamsd::glorot(8, a).flat() == GnnParamsd::glorot(8, b).flat());
}

TEST_CASE("float and double forward passes agree") {
  Rng rng(2);
  const auto d = GnnParamsd::glorot(16, rng);
  GnnParams<float> f(16);
  f.flat() = d.flat().cast<float>();
  const auto bs = blocks(3);
  Rng prng(4);
  std::vector<Plan> plans;
  for (int i = 0; i < 5; ++i) plans.push_back(sample_plan(prng, bs, 1 + i));
  for (auto c : {Connectivity::TGN, Connectivity::FCGN}) {
    const auto batch = GraphBatch::from_plans(plans, c);
    const auto ld = node_logits(d, batch);
    const auto lf = node_logits(f, batch);
    CHECK((ld.cast<float>() - lf).cwiseAbs().maxCoeff() < 1e-4f);
  }
}

TEST_CASE("batched logits equal per-graph logits") {
  Rng rng(9);
  const auto params = GnnParamsd::glorot(12, rng);
  const auto bs = blocks(10);
  std::vector<Plan> plans;
  for (int i = 0; i < 6; ++i) plans.push_back(sample_plan(rng, bs, 1 + i % 5));
  for (auto c : {Connectivity::TGN, Connectivity::FCGN}) {
    const auto batch = GraphBatch::from_plans(plans, c);
    const auto all = node_logits(params, batch);
    for (std::size_t g = 0; g < plans.size(); ++g) {
      const auto one = node_logits(params, GraphBatch::from_plans(std::span(&plans[g], 1), c));
      for (int k = 0; k < batch.sizes[g]; ++k) CHECK(all(batch.offsets[g] + k) == doctest::Approx(one(k)).epsilon(1e-12));
    }
  }
}

TEST_CASE("TGN is causal, FCGN is not") {
  Rng rng(12);
  const auto params = GnnParamsd::glorot(16, rng);
  const auto bs = blocks(13);
  const Plan plan = sample_plan(rng, bs, 4);
  const Plan prefix = plan.prefix(2);
  for (int rounds : {1, 2}) {
    for (auto c : {Connectivity::TGN, Connectivity::FCGN}) {
      const auto full = node_logits(params, GraphBatch::from_plans(std::span(&plan, 1), c), rounds);
      const auto pre = node_logits(params, GraphBatch::from_plans(std::span(&prefix, 1), c), rounds);
      const double diff = std::abs(full(1) - pre(1));
      if (c == Connectivity::TGN) {
        CHECK(diff < 1e-14);
      } else {
        CHECK(diff > 1e-9);
      }
    }
  }
}

TEST_CASE("a second round lets a TGN node see the order of the blocks below") {
  Rng rng(14);
  const auto params = GnnParamsd::glorot(16, rng);
  const auto bs = blocks(15);
  const Plan plan = sample_plan(rng, bs, 3);
  Plan swapped = plan;
  std::swap(swapped.actions[0], swapped.actions[1]);
  const auto logit = [&](const Plan& p, int rounds) {
    return node_logits(params, GraphBatch::from_plans(std::span(&p, 1), Connectivity::TGN), rounds)(2);
  };
  CHECK(std::abs(logit(plan, 1) - logit(swapped, 1)) < 1e-14);
  CHECK(std::abs(logit(plan, 2) - logit(swapped, 2)) > 1e-9);
}

TEST_CASE("plan readout variants") {
  const std::vector<double> logits{-1.0, 0.5, 2.0};
  ModelConfig cfg;
  CHECK(plan_readout(logits, cfg) == doctest::Approx(sigmoid(0.5)));
  cfg.plan_mean_of_probs = true;
  CHECK(plan_readout(logits, cfg) ==
        doctest::Approx((sigmoid(-1.0) + sigmoid(0.5) + sigmoid(2.0)) / 3.0));
}

TEST_CASE("forward output ranges") {
  Rng rng(21);
  const auto params = GnnParamsd::glorot(16, rng);
  const auto bs = blocks(22);
  for (int i = 0; i < 20; ++i) {
    const Plan plan = sample_plan(rng, bs, 1 + static_cast<std::size_t>(i % 5));
    const auto out = forward(params, plan, {});
    CHECK(out.node_probs.size() == plan.size());
    CHECK(out.plan_prob > 0.0);
    CHECK(out.plan_prob < 1.0);
  }
}

TEST_CASE("analytic gradient matches central differences") {
  const auto bs = blocks(31);
  Rng rng(32);
  for (auto conn : {Connectivity::TGN, Connectivity::FCGN}) {
    for (bool mean_probs : {false, true}) {
      for (bool step_plan : {false, true}) {
       for (int rounds : {1, 3}) {
        CAPTURE(rounds);
        ModelConfig cfg{conn, 6, mean_probs, step_plan, rounds};
        auto params = GnnParamsd::glorot(cfg.hidden, rng);
        params.flat() += 0.1 * Eigen::VectorXd::Random(params.flat().size());
        std::vector<EncodedItem> items;
        for (int i = 0; i < 4; ++i) {
          const Plan plan = sample_plan(rng, bs, 1 + static_cast<std::size_t>(i + 1) % 5);
          items.push_back(encode_item({plan, i % 2 == 0, i < 2 ? ModelClass::Comp : ModelClass::SS}));
        }
        const auto [loss, g] = bce_loss_and_grad(params, items, cfg);
        CHECK(loss == doctest::Approx(bce_loss(params, items, cfg)).epsilon(1e-12));
        const Eigen::VectorXd num = numeric_grad(params, items, cfg);
        const double rel = (g - num).norm() / std::max(1e-12, num.norm());
        CHECK(rel < 1e-4);
       }
      }
    }
  }
}

TEST_CASE("loss value matches a direct computation") {
  Rng rng(41);
  const auto params = GnnParamsd::glorot(8, rng);
  const auto bs = blocks(42);
  const Plan a = sample_plan(rng, bs, 3);
  const Plan b = sample_plan(rng, bs, 2);
  const ModelConfig cfg;
  const std::vector<TrainItem> items{{a, true, ModelClass::Comp}, {b, false, ModelClass::SS}};
  const double pa = forward(params, a, cfg).plan_prob;
  const double pb = forward(params, b, cfg).node_probs.back();
  const double expected = -(std::log(pa) + std::log(1 - pb)) / 2;
  CHECK(bce_loss_and_grad(params, std::span<const TrainItem>(items), cfg).first == doctest::Approx(expected));
}

TEST_CASE("step probabilities") {
  const auto bs = blocks(51);
  Rng rng(52);
  for (auto conn : {Connectivity::TGN, Connectivity::FCGN}) {
    const Ensemble ens = Ensemble::create({conn, 8, false, false}, 3, 53);
    const Plan plan = sample_plan(rng, bs, 4);
    const Eigen::MatrixXd m = member_step_probs(ens, plan);
    REQUIRE(m.rows() == 3);
    REQUIRE(m.cols() == 4);
    CHECK(m.col(0).isOnes());
    for (Eigen::Index i = 1; i < 4; ++i) {
      const Plan pre = plan.prefix(static_cast<std::size_t>(i) + 1);
      for (Eigen::Index k = 0; k < 3; ++k) {
        CHECK(m(k, i) == doctest::Approx(forward(ens.members[k], pre, ens.config).node_probs.back()).epsilon(1e-12));
      }
      CHECK(predict_step(ens, pre) == doctest::Approx(m.col(i).mean()).epsilon(1e-12));
    }
    double prod = 1.0;
    for (Eigen::Index i = 0; i < 4; ++i) prod *= m.col(i).mean();
    CHECK(plan_feasibility_ss(ens, plan) == doctest::Approx(prod).epsilon(1e-12));

    const std::vector<Plan> plans{plan, plan.prefix(2)};
    const auto batched = member_step_probs(ens, plans);
    CHECK(batched[0].isApprox(m, 1e-12));
    CHECK(batched[1].isApprox(member_step_probs(ens, plans[1]), 1e-12));
    const auto pp = member_plan_probs(ens, plans);
    CHECK(pp[0] == member_plan_probs(ens, plan));
  }
}

TEST_CASE("ensemble members differ and creation is deterministic") {
  const Ensemble a = Ensemble::create({}, 3, 7);
  const Ensemble b = Ensemble::create({}, 3, 7);
  CHECK(a.members[0].flat() == b.members[0].flat());
  CHECK(a.members[0].flat() != a.members[1].flat());
  CHECK(Ensemble::create({}, 3, 8).members[0].flat() != a.members[0].flat());
}

TEST_CASE("augment yields four rotations with copied labels") {
  const LabeledPlan lp{stack({at(cube(0), 0.0), at(cube(1), 0.03, 0.01)}), {true, false}, false};
  const auto aug = augment(lp);
  REQUIRE(aug.size() == 4);
  CHECK(aug[0].plan == lp.plan);
  for (const auto& a : aug) {
    CHECK(a.step_labels == lp.step_labels);
    CHECK(a.overall == lp.overall);
  }
  CHECK(aug[1].plan.actions[1].pose.dx == doctest::Approx(-0.01));
  CHECK(aug[1].plan.actions[1].pose.dy == doctest::Approx(0.03));
}

TEST_CASE("training reduces loss and never ends worse on validation") {
  Rng rng(61);
  const auto bs = blocks(62, 10);
  std::vector<TrainItem> train_set, val_set;
  for (int i = 0; i < 200; ++i) {
    const Plan plan = sample_plan(rng, bs, 2);
    (i % 5 == 0 ? val_set : train_set).push_back({plan, is_constructable(plan), ModelClass::Comp});
  }
  Ensemble ens = Ensemble::create({Connectivity::TGN, 16, false, false}, 2, 63);
  std::vector<EncodedItem> enc_val;
  for (const auto& t : val_set) enc_val.push_back(encode_item(t));
  const double before = bce_loss(ens.members[0], enc_val, ens.config);
  TrainConfig cfg;
  cfg.max_epochs = 100;
  const auto logs = train(ens, train_set, val_set, cfg);
  REQUIRE(logs.size() == 2);
  const double after = bce_loss(ens.members[0], enc_val, ens.config);
  CHECK(after <= before);
  CHECK(after < 0.9 * before);
  CHECK(logs[0].best_val_loss == doctest::Approx(after).epsilon(1e-9));
}

TEST_CASE("parallel training matches serial training") {
  Rng rng(71);
  const auto bs = blocks(72, 10);
  std::vector<TrainItem> train_set, val_set;
  for (int i = 0; i < 60; ++i) {
    const Plan plan = sample_plan(rng, bs, 3);
    (i % 5 == 0 ? val_set : train_set).push_back({plan, is_constructable(plan), ModelClass::SS});
  }
  TrainConfig cfg;
  cfg.max_epochs = 5;
  Ensemble serial = Ensemble::create({Connectivity::FCGN, 8, false, false}, 3, 73);
  Ensemble parallel = serial;
  train(serial, train_set, val_set, cfg);
  cfg.threads = 3;
  train(parallel, train_set, val_set, cfg);
  for (std::size_t m = 0; m < 3; ++m) CHECK(serial.members[m].flat() == parallel.members[m].flat());
}

TEST_CASE("TrainConfig validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.learning_rate = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.validation_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
