#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "tvp/model.hpp"
#include "tvp/vocabulary.hpp"

namespace tvp {

struct DecodeOptions {
  int max_new_tokens = 4;
  // Logits of already generated tokens are divided by this when positive, multiplied when
  // negative. 1.0 disables it.
  double repetition_penalty = 1.0;
  // Added to the EOS logit, scaled by the number of tokens generated so far. 0.0 disables it.
  double length_penalty = 0.0;
};

// Next-token logits given the tokens generated so far.
using NextLogits = std::function<Eigen::VectorXd(const std::vector<int>& generated)>;

// Greedy decoding with the penalties above; stops at EOS or the token budget. The returned ids
// exclude EOS.
std::vector<int> greedy_decode(const NextLogits& next, int eos_id, const DecodeOptions& opts);

// Applies both penalties in place for one step.
void apply_penalties(Eigen::VectorXd& logits, const std::vector<int>& generated, int eos_id,
                     const DecodeOptions& opts);

template <typename T>
std::vector<int> generate_ids(const Model<T>& model, const std::vector<int>& prompt_tokens,
                              const std::vector<VisualSlot>& slots, const DecodeOptions& opts);

template <typename T>
std::vector<std::string> generate(const Model<T>& model, const TokenizedPrompt& prompt,
                                  const Vocabulary& vocab, const DecodeOptions& opts);

}  // namespace tvp
