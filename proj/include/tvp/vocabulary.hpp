#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tvp {

struct DatasetManifest;

// Lower-cases, splits on whitespace and emits each punctuation character as its own word.
std::vector<std::string> split_words(std::string_view text);
std::string join_words(const std::vector<std::string>& words);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kImgOpen = 4;
  static constexpr int kImgClose = 5;
  static constexpr int kNumSpecial = 6;

  Vocabulary();
  // Specials, then digits 0-9, then `words` in sorted order (duplicates and specials ignored).
  explicit Vocabulary(const std::vector<std::string>& words);

  int id(const std::string& word) const;  // kUnk when absent
  bool contains(const std::string& word) const { return ids_.count(word) != 0; }
  const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

  std::vector<int> encode(const std::vector<std::string>& words) const;
  // Drops special tokens.
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

 private:
  void add(const std::string& word);

  std::vector<std::string> words_;
  std::map<std::string, int> ids_;
};

// Vocabulary over template text plus the questions and answers of the training split(s).
Vocabulary build_vocabulary(const std::vector<const DatasetManifest*>& manifests,
                            const std::vector<std::string>& template_texts);

}  // namespace tvp
