#include "tvp/decoding.hpp"

#include <set>

#include "tvp/error.hpp"

namespace tvp {

void apply_penalties(Eigen::VectorXd& logits, const std::vector<int>& generated, int eos_id,
                     const DecodeOptions& opts) {
  if (opts.repetition_penalty != 1.0) {
    const std::set<int> seen(generated.begin(), generated.end());
    for (int id : seen) {
      double& v = logits(id);
      v = v > 0.0 ? v / opts.repetition_penalty : v * opts.repetition_penalty;
    }
  }
  logits(eos_id) += opts.length_penalty * static_cast<double>(generated.size());
}

std::vector<int> greedy_decode(const NextLogits& next, int eos_id, const DecodeOptions& opts) {
  std::vector<int> generated;
  for (int step = 0; step < opts.max_new_tokens; ++step) {
    Eigen::VectorXd logits = next(generated);
    apply_penalties(logits, generated, eos_id, opts);
    Eigen::Index best = 0;
    logits.maxCoeff(&best);
    if (static_cast<int>(best) == eos_id) break;
    generated.push_back(static_cast<int>(best));
  }
  return generated;
}

template <typename T>
std::vector<int> generate_ids(const Model<T>& model, const std::vector<int>& prompt_tokens,
                              const std::vector<VisualSlot>& slots, const DecodeOptions& opts) {
  const int budget = model.config().max_seq_len - opts.max_new_tokens;
  if (static_cast<int>(prompt_tokens.size()) > budget) {
    throw Error(ErrorCode::sequence_too_long,
                "prompt of " + std::to_string(prompt_tokens.size()) + " tokens leaves no room for " +
                    std::to_string(opts.max_new_tokens) + " new tokens");
  }
  const auto visual = model.embed_visuals(slots);
  std::vector<int> tokens = prompt_tokens;
  const NextLogits next = [&](const std::vector<int>& generated) {
    tokens.resize(prompt_tokens.size());
    tokens.insert(tokens.end(), generated.begin(), generated.end());
    const auto logits = model.decode(tokens, slots, visual);
    return Eigen::VectorXd(logits.row(logits.rows() - 1).transpose().template cast<double>());
  };
  return greedy_decode(next, Vocabulary::kEos, opts);
}

template <typename T>
std::vector<std::string> generate(const Model<T>& model, const TokenizedPrompt& prompt,
                                  const Vocabulary& vocab, const DecodeOptions& opts) {
  std::vector<int> prompt_tokens(prompt.tokens.begin(), prompt.tokens.begin() + prompt.answer_start);
  return vocab.decode(generate_ids(model, prompt_tokens, prompt.slots, opts));
}

template std::vector<int> generate_ids<float>(const Model<float>&, const std::vector<int>&,
                                              const std::vector<VisualSlot>&, const DecodeOptions&);
template std::vector<int> generate_ids<double>(const Model<double>&, const std::vector<int>&,
                                               const std::vector<VisualSlot>&, const DecodeOptions&);
template std::vector<std::string> generate<float>(const Model<float>&, const TokenizedPrompt&,
                                                  const Vocabulary&, const DecodeOptions&);
template std::vector<std::string> generate<double>(const Model<double>&, const TokenizedPrompt&,
                                                   const Vocabulary&, const DecodeOptions&);

}  // namespace tvp
