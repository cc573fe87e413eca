#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tvp/dataset.hpp"
#include "tvp/image.hpp"
#include "tvp/vocabulary.hpp"

namespace tvp {

enum class BaselineMode { no_mask, region_in_text, crop_region, draw_region, context_only, targeted };

inline constexpr BaselineMode kAllModes[] = {BaselineMode::no_mask,     BaselineMode::region_in_text,
                                             BaselineMode::crop_region, BaselineMode::draw_region,
                                             BaselineMode::context_only, BaselineMode::targeted};

std::string_view to_string(BaselineMode mode);
BaselineMode mode_from_string(std::string_view name);  // throws invalid_config

// Which projection a visual segment goes through.
enum class Stream { context, region };

std::string_view to_string(Stream stream);

struct PromptSegment {
  enum class Kind { text, visual };

  Kind kind = Kind::text;
  std::vector<std::string> words;      // text
  std::shared_ptr<const Image> image;  // visual
  Stream stream = Stream::context;     // visual

  static PromptSegment text(std::vector<std::string> words);
  static PromptSegment visual(std::shared_ptr<const Image> image, Stream stream);
};

struct PromptTemplate {
  std::string instruction = "Answer the question below using the context below Context:";
  std::string detail_prefix = "Region:";
  std::string question_wrapper = "Question: <q> Answer:";
  std::string baseline_template =
      "Answer the question below using the context below Context: <Img><Image></Img>Question:"
      "<Question>Answer:";

  static constexpr std::string_view kQuestionSlot = "<q>";
  static constexpr std::string_view kBaselineImageSlot = "<Img><Image></Img>";
  static constexpr std::string_view kBaselineQuestionSlot = "<Question>";

  // Throws invalid_config.
  void validate() const;
  // Template words that must be in the vocabulary.
  std::vector<std::string> texts() const;
};

// Image-level knobs shared by every mode.
struct AssemblyOptions {
  Rgb outline_color{0, 255, 0};
  int outline_thickness = 2;
  Rgb blank_fill{0, 0, 0};
};

struct AssembledPrompt {
  std::vector<PromptSegment> segments;
  BaselineMode mode = BaselineMode::targeted;
  int answer_region_start = -1;  // set by tokenize

  int visual_count() const;
};

AssembledPrompt assemble_prompt(const VQASample& sample, BaselineMode mode,
                                const PromptTemplate& tpl, const AssemblyOptions& opts = {});

struct VisualSlot {
  Stream stream = Stream::context;
  int start = 0;  // first slot position (after the <img> token)
  int count = 0;
  std::shared_ptr<const Image> image;
};

struct TokenizedPrompt {
  std::vector<int> tokens;
  std::vector<std::uint8_t> loss_mask;  // 1 on answer tokens and the terminal EOS
  std::vector<VisualSlot> slots;
  int answer_start = 0;  // index of the first answer token == prompt length
};

// Text segments become word ids; each visual segment becomes <img>, visual_tokens slot
// placeholders and </img>. When `answer` is given it is appended with EOS and supervised.
TokenizedPrompt tokenize(AssembledPrompt& prompt, const Vocabulary& vocab, int visual_tokens,
                         const std::optional<std::vector<std::string>>& answer = std::nullopt);

// Inverse of the text part of tokenize; visual slots and specials are skipped.
std::vector<std::string> detokenize(const std::vector<int>& tokens, const Vocabulary& vocab);

}  // namespace tvp
