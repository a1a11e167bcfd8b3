#pragma once

// Synthetic non-SDG documents: words drawn i.i.d. in proportion to a
// frequency table. No co-occurrence structure is modelled.
//
// Draw order: document i (0-based, in output order) uses its own
// Rng(sub_seed(seed, i)); its words are drawn left to right, each as
// uniform_index(total_count) located in the cumulative counts.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sdglab/corpus.hpp"
#include "sdglab/detail/csv.hpp"
#include "sdglab/detail/unicode.hpp"
#include "sdglab/error.hpp"
#include "sdglab/parallel.hpp"
#include "sdglab/random.hpp"
#include "sdglab/tokenize.hpp"

namespace sdgl {

class WordFrequencyTable {
 public:
  WordFrequencyTable() = default;

  /// Adds `count` occurrences of `word` (case-folded); repeated words sum.
  void add(std::string_view word, std::uint64_t count) {
    if (word.empty()) throw Error(ErrorCode::Schema, "empty word in frequency table");
    if (count == 0) throw Error(ErrorCode::Schema, "non-positive count for '" + std::string(word) + "'");
    const auto toks = tokenize(word);
    if (toks.size() != 1 || toks.front().size() != word.size()) {
      throw Error(ErrorCode::Schema, "'" + std::string(word) + "' is not a single token");
    }
    const std::string& w = toks.front();
    auto [it, inserted] = index_.emplace(w, words_.size());
    if (inserted) {
      words_.push_back(w);
      counts_.push_back(count);
      cumulative_.push_back(total_ + count);
    } else {
      counts_[it->second] += count;
      for (std::size_t i = it->second; i < cumulative_.size(); ++i) cumulative_[i] += count;
    }
    total_ += count;
  }

  const std::vector<std::string>& words() const noexcept { return words_; }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
  std::uint64_t total() const noexcept { return total_; }
  std::size_t size() const noexcept { return words_.size(); }
  bool empty() const noexcept { return words_.empty(); }

  double probability(std::string_view word) const {
    auto it = index_.find(std::string(word));
    return it == index_.end() ? 0.0 : static_cast<double>(counts_[it->second]) / static_cast<double>(total_);
  }
  std::uint64_t count(std::string_view word) const {
    auto it = index_.find(std::string(word));
    return it == index_.end() ? 0 : counts_[it->second];
  }

  /// Index of the word drawn by one step of `rng`.
  std::size_t draw(Rng& rng) const {
    const std::uint64_t r = rng.uniform_index(total_);
    return static_cast<std::size_t>(std::upper_bound(cumulative_.begin(), cumulative_.end(), r) -
                                    cumulative_.begin());
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> cumulative_;
  std::map<std::string, std::size_t> index_;
  std::uint64_t total_ = 0;
};

/// Reads `word<TAB>count` lines; lines starting with '#' and blank lines are
/// ignored.
inline WordFrequencyTable load_frequency_table(const std::string& path) {
  const std::string text = detail::read_file(path);
  WordFrequencyTable table;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw Error(ErrorCode::Schema, where + ": expected word<TAB>count");
    const auto word = line.substr(0, tab);
    const auto count = detail::parse_int(line.substr(tab + 1));
    if (!count) throw Error(ErrorCode::Schema, where + ": count is not an integer");
    if (*count <= 0) throw Error(ErrorCode::Schema, where + ": count must be positive");
    if (word.empty()) throw Error(ErrorCode::Schema, where + ": empty word");
    table.add(word, static_cast<std::uint64_t>(*count));
  }
  if (table.empty()) throw Error(ErrorCode::Schema, path + ": no entries");
  return table;
}

struct SynthSpec {
  std::vector<std::size_t> lengths;
  std::size_t docs_per_length = 1;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kMaxSynthLength = 10'000'000;

namespace detail {

inline std::string synth_text(const WordFrequencyTable& table, std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  std::string text;
  for (std::size_t w = 0; w < length; ++w) {
    if (w) text += ' ';
    text += table.words()[table.draw(rng)];
  }
  return text;
}

inline void check_table(const WordFrequencyTable& table) {
  if (table.empty()) throw Error(ErrorCode::Params, "frequency table is empty");
}

}  // namespace detail

/// `docs_per_length` documents for each requested length, in the order the
/// lengths are listed. Ids are `synth-<length>-<k>`.
inline Dataset generate_documents(const WordFrequencyTable& table, const SynthSpec& spec,
                                  std::string name = "synthetic", unsigned threads = 1) {
  detail::check_table(table);
  if (spec.lengths.empty() || spec.docs_per_length == 0) {
    throw Error(ErrorCode::Params, "synthetic spec needs lengths and docs_per_length > 0");
  }
  for (auto len : spec.lengths) {
    if (len < 1 || len > kMaxSynthLength) {
      throw Error(ErrorCode::Params, "synthetic length " + std::to_string(len) + " outside [1, 1e7]");
    }
  }
  const std::size_t n = spec.lengths.size() * spec.docs_per_length;
  std::vector<Document> docs(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const std::size_t len = spec.lengths[i / spec.docs_per_length];
    const std::size_t k = i % spec.docs_per_length;
    docs[i] = Document("synth-" + std::to_string(len) + "-" + std::to_string(k),
                       detail::synth_text(table, len, sub_seed(spec.seed, i)));
  });
  return Dataset(std::move(name), DatasetKind::Synthetic, std::move(docs));
}

/// One synthetic document per reference document, with the same word count.
/// Ids are `synth-<reference id>`.
inline Dataset generate_matched(const WordFrequencyTable& table, const Dataset& reference, std::uint64_t seed,
                                unsigned threads = 1) {
  detail::check_table(table);
  const auto& ref = reference.documents();
  std::vector<Document> docs(ref.size());
  parallel_for(ref.size(), threads, [&](std::size_t i) {
    docs[i] = Document("synth-" + ref[i].id, detail::synth_text(table, ref[i].word_count(), sub_seed(seed, i)));
  });
  return Dataset(reference.name() + "_synthetic", DatasetKind::Synthetic, std::move(docs));
}

}  // namespace sdgl
