#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ensnet/data.hpp"
#include "ensnet/model.hpp"

namespace ensnet {

// Outcome of the vote for one sample. Voter 0 is the base CNN, voters
// 1..k are the subnetworks in split order.
struct VoteRecord {
  std::vector<int> voter_predictions;
  std::vector<std::vector<float>> voter_probs;
  int winner = -1;
  bool tie_broken = false;
};

// Each voter votes for the argmax of its probabilities (lowest index on
// equal probabilities). The modal class wins. When several classes share
// the top vote count, the one with the largest probability mass summed
// over all voters wins; exact ties fall to the lowest class index.
VoteRecord majority_vote(std::vector<std::vector<float>> voter_probs);

// Class with the largest summed probability (diagnostic only).
int soft_vote(const std::vector<std::vector<float>>& voter_probs);

// Per-sample vote records from one forward pass of logits.
std::vector<VoteRecord> vote(const ForwardResult& logits);

// Eval-mode prediction over x:[N,C,H,W], processed in chunks of batch_size.
std::vector<VoteRecord> predict(EnsNetModel& model, const Tensor<float>& x, std::size_t batch_size = 100);

struct EvaluationReport {
  std::size_t samples = 0;
  std::vector<double> voter_error;  // base first, then subnets
  double ensemble_error = 0.0;
  // agreement[i][j]: fraction of samples on which voters i and j predict the same class.
  std::vector<std::vector<double>> agreement;
  // Soft-vote error, filled only when requested.
  double soft_vote_error = -1.0;

  double base_error() const { return voter_error.at(0); }
};

struct EvaluateOptions {
  std::size_t batch_size = 100;
  bool soft_vote_diagnostic = false;
};

EvaluationReport evaluate(EnsNetModel& model, const Dataset& dataset, const EvaluateOptions& options = {});

// Builds the report from precomputed vote records (used by evaluate and tests).
EvaluationReport summarize_votes(std::span<const VoteRecord> records, std::span<const int> labels,
                                 bool soft_vote_diagnostic = false);

}  // namespace ensnet
