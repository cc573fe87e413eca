#include "tvp/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "tvp/dataset.hpp"
#include "tvp/error.hpp"

namespace tvp {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char raw : text) {
    const auto ch = static_cast<unsigned char>(raw);
    if (std::isspace(ch)) {
      flush();
    } else if (std::ispunct(ch)) {
      flush();
      out.emplace_back(1, raw);
    } else {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    }
  }
  flush();
  return out;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

namespace {
const char* kSpecials[Vocabulary::kNumSpecial] = {"<pad>", "<bos>", "<eos>", "<unk>", "<img>", "</img>"};
}

Vocabulary::Vocabulary() {
  for (const char* s : kSpecials) add(s);
  for (char d = '0'; d <= '9'; ++d) add(std::string(1, d));
}

Vocabulary::Vocabulary(const std::vector<std::string>& words) : Vocabulary() {
  std::set<std::string> sorted(words.begin(), words.end());
  for (const auto& w : sorted) {
    if (!w.empty() && !ids_.count(w)) add(w);
  }
}

void Vocabulary::add(const std::string& word) {
  ids_.emplace(word, static_cast<int>(words_.size()));
  words_.push_back(word);
}

int Vocabulary::id(const std::string& word) const {
  auto it = ids_.find(word);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& words) const {
  std::vector<int> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(id(w));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  for (int i : ids) {
    if (i >= kNumSpecial && i < size()) out.push_back(words_[static_cast<std::size_t>(i)]);
  }
  return out;
}

Vocabulary build_vocabulary(const std::vector<const DatasetManifest*>& manifests,
                            const std::vector<std::string>& template_texts) {
  std::vector<std::string> words;
  for (const auto& t : template_texts) {
    for (auto& w : split_words(t)) words.push_back(std::move(w));
  }
  bool any_sample = false;
  for (const DatasetManifest* m : manifests) {
    for (const auto& a : m->answers) words.push_back(a);
    for (const auto& s : m->samples) {
      any_sample = true;
      for (auto& w : split_words(s.question)) words.push_back(std::move(w));
      for (auto& w : split_words(s.answer)) words.push_back(std::move(w));
    }
  }
  if (manifests.empty() || !any_sample) {
    throw Error(ErrorCode::empty_corpus, "vocabulary needs at least one sample");
  }
  return Vocabulary(words);
}

}  // namespace tvp
