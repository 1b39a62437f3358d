#include "doctest.h"

#include "btl/errors.hpp"
#include "btl/eval.hpp"
#include "btl/format.hpp"
#include "support/test_support.hpp"

using namespace btl;
using testing::make_step;

namespace {

const std::string kFixtures = BTL_FIXTURE_DIR;

std::string completion_for(const ActionCall& action) {
  BtlOutput out;
  out.think = "t";
  out.link = {{"p", action}};
  return serialize_btl(out);
}

}  // namespace

TEST_CASE("metric_type") {
  CHECK(metric_type(ActionCall::tap(1, 1), ActionCall::tap(500, 9)) == 1);
  CHECK(metric_type(ActionCall::swipe(Direction::Up), ActionCall::tap(1, 1)) == 0);
  CHECK(metric_type(ActionCall::back(), ActionCall::back()) == 1);
}

TEST_CASE("metric_gr") {
  const auto tap = make_step(ActionCall::tap(60, 40), {}, BBox{10, 20, 110, 60});
  CHECK(metric_gr(ActionCall::tap(60, 40), tap) == 1);
  CHECK(metric_gr(ActionCall::tap(0, 0), tap) == 0);
  CHECK(metric_gr(ActionCall::back(), tap) == 0);
  CHECK(metric_gr(std::nullopt, tap) == 0);
  CHECK_FALSE(metric_gr(ActionCall::tap(60, 40), make_step(ActionCall::swipe(Direction::Up))).has_value());
}

TEST_CASE("metric_sr") {
  const auto swipe = make_step(ActionCall::swipe(Direction::Left));
  CHECK(metric_sr(ActionCall::swipe(Direction::Left), swipe) == 1);
  CHECK(metric_sr(ActionCall::swipe(Direction::Right), swipe) == 0);
}

TEST_CASE("grounding_accuracy") {
  const BBox b{10, 20, 110, 60};
  CHECK(grounding_accuracy(b.center(), b) == 1);
  CHECK(grounding_accuracy(Point(10, 60), b) == 1);
  CHECK(grounding_accuracy(Point(9.99, 40), b) == 0);
}

TEST_CASE("metric_sr agrees with reward_link and SR never exceeds Type") {
  testing::Rng rng(41);
  for (int trial = 0; trial < 2000; ++trial) {
    const ActionCall gt_action = testing::random_action(rng, 100.0);
    const auto step = make_step(gt_action, {}, trial % 2 ? std::optional<BBox>(testing::random_box(rng)) : std::nullopt,
                                100, 100);
    const ActionCall pred = trial % 3 == 0 ? gt_action : testing::random_action(rng, 100.0);
    CHECK(static_cast<double>(metric_sr(pred, step)) == reward_link(pred, step));
    CHECK(metric_sr(pred, step) <= metric_type(pred, gt_action));
  }
}

TEST_CASE("EvalReport aggregation") {
  EvalReport r;
  RewardConfig cfg;
  r.add(make_step(ActionCall::back()), completion_for(ActionCall::back()), false, cfg);
  r.add(make_step(ActionCall::tap(5, 5), {}, BBox{0, 0, 10, 10}), "garbage", true, cfg);
  CHECK(r.n_steps == 2);
  CHECK(r.type_acc() == 0.5);
  CHECK(r.sr_acc() == 0.5);
  CHECK(r.gr_acc() == 0.0);
  CHECK(r.grounding_acc() == 0.0);
  CHECK(r.format_failures == 1);
  CHECK(r.confusion["Tap"]["invalid"] == 1);
  CHECK(r.confusion["Back"]["Back"] == 1);

  EvalReport no_coords;
  no_coords.add(make_step(ActionCall::home()), completion_for(ActionCall::home()), false, cfg);
  CHECK_FALSE(no_coords.gr_acc().has_value());
  CHECK(no_coords.to_json()["gr_acc"].is_null());
}

TEST_CASE("evaluate the four-step fixture") {
  const auto report = evaluate(kFixtures + "/eval_dataset.jsonl", kFixtures + "/eval_predictions.jsonl");
  CHECK(report.n_steps == 4);
  CHECK(report.type_acc() == 0.75);
  CHECK(report.sr_acc() == 0.5);
  CHECK(report.gr_acc() == 0.5);
  CHECK_FALSE(report.grounding_acc().has_value());
  const auto j = report.to_json();
  std::vector<std::string> keys;
  for (const auto& [k, _] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"n_steps", "type_acc", "gr_acc", "sr_acc", "grounding_acc", "counts", "confusion"});
}

TEST_CASE("evaluate join errors") {
  CHECK_THROWS_AS(evaluate(kFixtures + "/eval_dataset.jsonl", kFixtures + "/eval_predictions_mismatched.jsonl"),
                  JoinError);
  CHECK_THROWS_AS(evaluate(kFixtures + "/validate_empty.jsonl", kFixtures + "/validate_empty.jsonl"), Error);
  CHECK_THROWS_AS(evaluate(kFixtures + "/missing.jsonl", kFixtures + "/eval_predictions.jsonl"), Error);
}
