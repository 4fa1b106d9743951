#include "doctest.h"
#include "ensnet/errors.hpp"
#include "ensnet/inference.hpp"
#include "../support/fixtures.hpp"

using namespace ensnet;

namespace {

std::vector<float> one_hot(std::size_t k, std::size_t c, float p = 0.9f) {
  std::vector<float> v(k, (1.0f - p) / static_cast<float>(k - 1));
  v[c] = p;
  return v;
}

}  // namespace

TEST_CASE("modal class wins") {
  const VoteRecord r = majority_vote({one_hot(3, 0), one_hot(3, 1), one_hot(3, 1)});
  CHECK(r.winner == 1);
  CHECK_FALSE(r.tie_broken);
  CHECK(r.voter_predictions == std::vector<int>{0, 1, 1});
}

TEST_CASE("vote ties go to the larger summed probability") {
  // 2 votes for class 0, 2 for class 1; class 1 is held more confidently.
  const VoteRecord r = majority_vote({one_hot(3, 0, 0.5f), one_hot(3, 0, 0.5f), one_hot(3, 1, 0.9f),
                                      one_hot(3, 1, 0.9f)});
  CHECK(r.winner == 1);
  CHECK(r.tie_broken);
}

TEST_CASE("exact ties fall to the lowest class index") {
  const VoteRecord r = majority_vote({one_hot(4, 3), one_hot(4, 2)});
  CHECK(r.winner == 2);
  CHECK(r.tie_broken);
}

TEST_CASE("each voter's argmax prefers the lowest index on equal probabilities") {
  const VoteRecord r = majority_vote({{0.4f, 0.4f, 0.2f}});
  CHECK(r.voter_predictions[0] == 0);
}

TEST_CASE("soft vote sums probabilities") {
  CHECK(soft_vote({{0.6f, 0.4f}, {0.1f, 0.9f}}) == 1);
}

TEST_CASE("ragged voters are rejected") {
  CHECK_THROWS_AS(majority_vote({{0.5f, 0.5f}, {1.0f}}), DimensionError);
  CHECK_THROWS_AS(majority_vote({}), ContractError);
}

TEST_CASE("summarize_votes error rates and agreement") {
  std::vector<VoteRecord> records;
  records.push_back(majority_vote({one_hot(3, 0), one_hot(3, 0), one_hot(3, 1)}));
  records.push_back(majority_vote({one_hot(3, 2), one_hot(3, 1), one_hot(3, 1)}));
  const std::vector<int> labels{0, 2};
  const EvaluationReport rep = summarize_votes(records, labels, true);
  CHECK(rep.samples == 2);
  CHECK(rep.voter_error == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(rep.ensemble_error == doctest::Approx(0.5));
  CHECK(rep.agreement[0][1] == doctest::Approx(0.5));
  CHECK(rep.agreement[1][2] == doctest::Approx(0.5));
  CHECK(rep.agreement[2][2] == doctest::Approx(1.0));
  CHECK(rep.soft_vote_error >= 0.0);
}

TEST_CASE("evaluate and predict on a micro model") {
  EnsNetModel model = EnsNetModel::build(testing::micro_config(2), 4);
  const Dataset d = testing::quadrant_dataset(23, 2, Split::test);
  const auto whole = predict(model, d.images, 100);
  const auto chunked = predict(model, d.images, 4);
  REQUIRE(whole.size() == 23);
  for (std::size_t i = 0; i < whole.size(); ++i) {
    CHECK(whole[i].winner == chunked[i].winner);
    CHECK(whole[i].voter_predictions.size() == 3);
  }
  const EvaluationReport rep = evaluate(model, d);
  CHECK(rep.samples == 23);
  CHECK(rep.voter_error.size() == 3);
  Dataset empty;
  empty.images = TensorF();
  CHECK_THROWS_AS(evaluate(model, empty), ContractError);
}
