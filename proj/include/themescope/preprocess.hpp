#pragma once

#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace themescope::preprocess {

using Tokens = std::vector<std::string>;

struct CleanSentence {
    std::string doc_id;
    int index = 0;
    Tokens tokens;
};

/// Tokenises on every code point that is neither a letter nor a digit, then
/// applies, in order: lowercase, drop tokens without a letter, drop
/// digit-only tokens, drop tokens shorter than two code points. Letters are
/// ASCII letters plus the Latin-1 Supplement and Latin Extended-A/B blocks.
/// Stop words are kept.
Tokens normalize_sentence(std::string_view raw);

/// A pinned stop-word list, identified by the FNV-1a hash of its file content.
class StopWords {
public:
    /// The list compiled in from data/stopwords.txt.
    static const StopWords& builtin();
    static StopWords from_text(std::string_view text);
    static StopWords load(const std::filesystem::path& path);

    bool contains(std::string_view term) const { return words_.contains(term); }
    const std::string& id() const noexcept { return id_; }
    std::size_t size() const noexcept { return words_.size(); }

private:
    std::set<std::string, std::less<>> words_;
    std::string id_;
};

struct Vocabulary {
    std::vector<std::string> terms;           // lexicographic
    std::vector<int> doc_frequencies;         // aligned with terms
    std::string stopword_list_id;

    /// Index of `term` in `terms`, or -1.
    long index_of(std::string_view term) const;
};

/// Terms whose sentence-level document frequency is at least `min_df`, minus
/// stop words. Throws EmptyVocabularyError when nothing survives, ParamError
/// when min_df < 1 or the corpus is empty.
Vocabulary build_vocabulary(std::span<const Tokens> corpus, int min_df, const StopWords& stopwords);

}  // namespace themescope::preprocess
