#include "ensnet/inference.hpp"

#include <algorithm>
#include <cstring>

#include "ensnet/errors.hpp"

namespace ensnet {
namespace {

int argmax(const std::vector<float>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

VoteRecord majority_vote(std::vector<std::vector<float>> voter_probs) {
  if (voter_probs.empty()) throw ContractError("majority_vote: no voters");
  const std::size_t classes = voter_probs.front().size();
  if (classes == 0) throw ContractError("majority_vote: empty probability vector");

  VoteRecord record;
  std::vector<std::size_t> counts(classes, 0);
  for (const auto& probs : voter_probs) {
    if (probs.size() != classes) throw DimensionError("majority_vote: voters disagree on the number of classes");
    const int choice = argmax(probs);
    record.voter_predictions.push_back(choice);
    ++counts[static_cast<std::size_t>(choice)];
  }

  const std::size_t top = *std::max_element(counts.begin(), counts.end());
  std::vector<std::size_t> tied;
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] == top) tied.push_back(c);
  }
  if (tied.size() == 1) {
    record.winner = static_cast<int>(tied.front());
  } else {
    record.tie_broken = true;
    double best_mass = -1.0;
    for (std::size_t c : tied) {
      double mass = 0.0;
      for (const auto& probs : voter_probs) mass += probs[c];
      if (mass > best_mass) {
        best_mass = mass;
        record.winner = static_cast<int>(c);
      }
    }
  }
  record.voter_probs = std::move(voter_probs);
  return record;
}

int soft_vote(const std::vector<std::vector<float>>& voter_probs) {
  if (voter_probs.empty()) throw ContractError("soft_vote: no voters");
  std::vector<double> mass(voter_probs.front().size(), 0.0);
  for (const auto& probs : voter_probs) {
    for (std::size_t c = 0; c < mass.size(); ++c) mass[c] += probs.at(c);
  }
  return static_cast<int>(std::max_element(mass.begin(), mass.end()) - mass.begin());
}

std::vector<VoteRecord> vote(const ForwardResult& logits) {
  std::vector<Tensor<float>> probs;
  probs.push_back(layers::softmax(logits.base_logits));
  for (const Tensor<float>& s : logits.subnet_logits) probs.push_back(layers::softmax(s));

  const std::size_t rows = logits.base_logits.dim(0);
  const std::size_t classes = logits.base_logits.dim(1);
  std::vector<VoteRecord> out;
  out.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<std::vector<float>> voter_probs;
    voter_probs.reserve(probs.size());
    for (const Tensor<float>& p : probs) {
      voter_probs.emplace_back(p.ptr() + r * classes, p.ptr() + (r + 1) * classes);
    }
    out.push_back(majority_vote(std::move(voter_probs)));
  }
  return out;
}

std::vector<VoteRecord> predict(EnsNetModel& model, const Tensor<float>& x, std::size_t batch_size) {
  if (x.rank() != 4) throw DimensionError("predict: input must be [N,C,H,W], got " + to_string(x.shape()));
  if (batch_size == 0) throw ContractError("predict: batch_size must be positive");
  const std::size_t total = x.dim(0);
  const std::size_t per_sample = x.size() / total;
  std::vector<VoteRecord> out;
  out.reserve(total);
  for (std::size_t start = 0; start < total; start += batch_size) {
    const std::size_t count = std::min(batch_size, total - start);
    Shape shape = x.shape();
    shape[0] = count;
    Tensor<float> chunk(shape);
    std::memcpy(chunk.ptr(), x.ptr() + start * per_sample, count * per_sample * sizeof(float));
    for (VoteRecord& record : vote(forward_all(model, chunk, Mode::eval))) out.push_back(std::move(record));
  }
  return out;
}

EvaluationReport summarize_votes(std::span<const VoteRecord> records, std::span<const int> labels,
                                 bool soft_vote_diagnostic) {
  if (records.empty()) throw ContractError("evaluate: empty dataset");
  if (records.size() != labels.size()) throw DimensionError("evaluate: record and label counts differ");
  const std::size_t voters = records.front().voter_predictions.size();

  EvaluationReport report;
  report.samples = records.size();
  std::vector<std::size_t> wrong(voters, 0);
  std::vector<std::vector<std::size_t>> agree(voters, std::vector<std::size_t>(voters, 0));
  std::size_t ensemble_wrong = 0;
  std::size_t soft_wrong = 0;
  for (std::size_t s = 0; s < records.size(); ++s) {
    const VoteRecord& r = records[s];
    for (std::size_t i = 0; i < voters; ++i) {
      if (r.voter_predictions[i] != labels[s]) ++wrong[i];
      for (std::size_t j = 0; j < voters; ++j) {
        if (r.voter_predictions[i] == r.voter_predictions[j]) ++agree[i][j];
      }
    }
    if (r.winner != labels[s]) ++ensemble_wrong;
    if (soft_vote_diagnostic && soft_vote(r.voter_probs) != labels[s]) ++soft_wrong;
  }
  const double n = static_cast<double>(records.size());
  for (std::size_t i = 0; i < voters; ++i) {
    report.voter_error.push_back(static_cast<double>(wrong[i]) / n);
    std::vector<double> row;
    for (std::size_t j = 0; j < voters; ++j) row.push_back(static_cast<double>(agree[i][j]) / n);
    report.agreement.push_back(std::move(row));
  }
  report.ensemble_error = static_cast<double>(ensemble_wrong) / n;
  if (soft_vote_diagnostic) report.soft_vote_error = static_cast<double>(soft_wrong) / n;
  return report;
}

EvaluationReport evaluate(EnsNetModel& model, const Dataset& dataset, const EvaluateOptions& options) {
  if (dataset.size() == 0) throw ContractError("evaluate: empty dataset");
  const std::vector<VoteRecord> records = predict(model, dataset.images, options.batch_size);
  return summarize_votes(records, dataset.labels, options.soft_vote_diagnostic);
}

}  // namespace ensnet
