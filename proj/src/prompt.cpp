#include "tvp/prompt.hpp"

#include "tvp/error.hpp"
#include "tvp/region_ops.hpp"

namespace tvp {

std::string_view to_string(BaselineMode mode) {
  switch (mode) {
    case BaselineMode::no_mask: return "no_mask";
    case BaselineMode::region_in_text: return "region_in_text";
    case BaselineMode::crop_region: return "crop_region";
    case BaselineMode::draw_region: return "draw_region";
    case BaselineMode::context_only: return "context_only";
    case BaselineMode::targeted: return "targeted";
  }
  return "targeted";
}

BaselineMode mode_from_string(std::string_view name) {
  for (BaselineMode m : kAllModes) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::invalid_config, "unknown mode '" + std::string(name) + "'");
}

std::string_view to_string(Stream stream) {
  return stream == Stream::context ? "context" : "region";
}

PromptSegment PromptSegment::text(std::vector<std::string> words) {
  PromptSegment s;
  s.kind = Kind::text;
  s.words = std::move(words);
  return s;
}

PromptSegment PromptSegment::visual(std::shared_ptr<const Image> image, Stream stream) {
  PromptSegment s;
  s.kind = Kind::visual;
  s.image = std::move(image);
  s.stream = stream;
  return s;
}

int AssembledPrompt::visual_count() const {
  int n = 0;
  for (const auto& s : segments) n += s.kind == PromptSegment::Kind::visual ? 1 : 0;
  return n;
}

namespace {

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::string replace_once(std::string text, std::string_view needle, const std::string& with) {
  const auto pos = text.find(needle);
  if (pos != std::string::npos) text.replace(pos, needle.size(), " " + with + " ");
  return text;
}

}  // namespace

void PromptTemplate::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::invalid_config, msg); };
  if (split_words(instruction).empty()) fail("instruction must not be empty");
  if (split_words(detail_prefix).empty()) fail("detail_prefix must not be empty");
  if (count_occurrences(question_wrapper, kQuestionSlot) != 1) {
    fail("question_wrapper must contain exactly one <q>");
  }
  if (count_occurrences(baseline_template, kBaselineImageSlot) != 1 ||
      count_occurrences(baseline_template, kBaselineQuestionSlot) != 1) {
    fail("baseline_template must contain exactly one image and one question placeholder");
  }
  if (baseline_template.find(kBaselineImageSlot) > baseline_template.find(kBaselineQuestionSlot)) {
    fail("baseline_template must place the image before the question");
  }
}

std::vector<std::string> PromptTemplate::texts() const {
  return {instruction, detail_prefix, replace_once(question_wrapper, kQuestionSlot, ""),
          replace_once(replace_once(baseline_template, kBaselineImageSlot, ""),
                       kBaselineQuestionSlot, "")};
}

AssembledPrompt assemble_prompt(const VQASample& sample, BaselineMode mode,
                                const PromptTemplate& tpl, const AssemblyOptions& opts) {
  if (!sample.image) throw Error(ErrorCode::invalid_config, "sample " + sample.id + " has no image");
  const Image& img = *sample.image;
  sample.region.validate(img.height, img.width);

  AssembledPrompt p;
  p.mode = mode;
  const bool global = sample.scope == Scope::global;

  if (mode == BaselineMode::targeted) {
    std::shared_ptr<const Image> context = sample.image;
    std::shared_ptr<const Image> region = sample.image;
    if (!global) {
      context = std::make_shared<const Image>(draw_region_outline(
          img, sample.region, opts.outline_color, opts.outline_thickness));
      region = std::make_shared<const Image>(crop_region(img, sample.region, img.height, img.width));
    }
    p.segments.push_back(PromptSegment::text(split_words(tpl.instruction)));
    p.segments.push_back(PromptSegment::visual(std::move(context), Stream::context));
    p.segments.push_back(PromptSegment::text(split_words(tpl.detail_prefix)));
    p.segments.push_back(PromptSegment::visual(std::move(region), Stream::region));
    p.segments.push_back(PromptSegment::text(
        split_words(replace_once(tpl.question_wrapper, PromptTemplate::kQuestionSlot, sample.question))));
    return p;
  }

  std::string question = sample.question;
  std::shared_ptr<const Image> visual = sample.image;
  Stream stream = Stream::context;
  switch (mode) {
    case BaselineMode::no_mask:
      break;
    case BaselineMode::region_in_text: {
      const RegionSpec box = sample.region.kind == RegionKind::mask
                                 ? mask_to_bbox(sample.region.mask())
                                 : sample.region;
      question = join_words(region_to_text(box)) + " " + question;
      break;
    }
    case BaselineMode::crop_region:
      visual = std::make_shared<const Image>(crop_region(img, sample.region, img.height, img.width));
      stream = Stream::region;
      break;
    case BaselineMode::draw_region:
      visual = std::make_shared<const Image>(
          draw_region_outline(img, sample.region, opts.outline_color, opts.outline_thickness));
      break;
    case BaselineMode::context_only:
      visual = std::make_shared<const Image>(blank_region(
          img, sample.region, opts.blank_fill, opts.outline_color, opts.outline_thickness));
      break;
    case BaselineMode::targeted:
      break;
  }

  const std::string& t = tpl.baseline_template;
  const auto image_pos = t.find(PromptTemplate::kBaselineImageSlot);
  const std::string before = t.substr(0, image_pos);
  const std::string after = t.substr(image_pos + PromptTemplate::kBaselineImageSlot.size());
  p.segments.push_back(PromptSegment::text(split_words(before)));
  p.segments.push_back(PromptSegment::visual(std::move(visual), stream));
  p.segments.push_back(PromptSegment::text(
      split_words(replace_once(after, PromptTemplate::kBaselineQuestionSlot, question))));
  return p;
}

TokenizedPrompt tokenize(AssembledPrompt& prompt, const Vocabulary& vocab, int visual_tokens,
                         const std::optional<std::vector<std::string>>& answer) {
  TokenizedPrompt out;
  for (const auto& seg : prompt.segments) {
    if (seg.kind == PromptSegment::Kind::text) {
      for (int id : vocab.encode(seg.words)) out.tokens.push_back(id);
      continue;
    }
    out.tokens.push_back(Vocabulary::kImgOpen);
    out.slots.push_back({seg.stream, static_cast<int>(out.tokens.size()), visual_tokens, seg.image});
    out.tokens.insert(out.tokens.end(), static_cast<std::size_t>(visual_tokens), Vocabulary::kPad);
    out.tokens.push_back(Vocabulary::kImgClose);
  }
  out.answer_start = static_cast<int>(out.tokens.size());
  prompt.answer_region_start = out.answer_start;
  out.loss_mask.assign(out.tokens.size(), 0);
  if (answer) {
    for (int id : vocab.encode(*answer)) {
      out.tokens.push_back(id);
      out.loss_mask.push_back(1);
    }
    out.tokens.push_back(Vocabulary::kEos);
    out.loss_mask.push_back(1);
  }
  return out;
}

std::vector<std::string> detokenize(const std::vector<int>& tokens, const Vocabulary& vocab) {
  return vocab.decode(tokens);
}

}  // namespace tvp
