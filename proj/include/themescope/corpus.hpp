#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace themescope::corpus {

enum class DocType { recommendation, guideline, legislation, code_of_practice };
enum class Era { pre_ai_act, post_ai_act };

std::string_view to_string(DocType type);
std::string_view to_string(Era era);
DocType parse_doc_type(std::string_view token);  // throws ManifestError
Era parse_era(std::string_view token);            // throws ManifestError

struct Document {
    std::string doc_id;
    std::string title;
    std::string issuer;
    DocType doc_type = DocType::guideline;
    int year = 0;
    Era era = Era::pre_ai_act;

    friend bool operator==(const Document&, const Document&) = default;
};

struct Sentence {
    std::string doc_id;
    int index = 0;
    std::string text;

    friend bool operator==(const Sentence&, const Sentence&) = default;
};

inline constexpr int kCorpusFirstYear = 2018;
inline constexpr int kCorpusLastYear = 2025;

/// Parses manifest CSV text (header doc_id,title,issuer,doc_type,year,era).
/// Row numbers in error messages are 1-based data rows.
std::vector<Document> parse_manifest(std::string_view text);
std::vector<Document> load_manifest(const std::filesystem::path& path);
std::string format_manifest(const std::vector<Document>& docs);
void save_manifest(const std::filesystem::path& path, const std::vector<Document>& docs);

/// Version tag of the built-in abbreviation list used by split_sentences.
inline constexpr std::string_view kAbbreviationListId = "abbrev-v1";
const std::vector<std::string>& abbreviations();

/// Rule-based splitter. A boundary follows '.', '!' or '?' when the next
/// characters are whitespace and then an uppercase ASCII letter or a digit,
/// unless the word ending at the terminator is a listed abbreviation.
std::vector<std::string> split_sentences(std::string_view text);

/// Sentence store backed by sentences.csv (header doc_id,sentence_index,text).
std::vector<Sentence> read_sentences(const std::filesystem::path& sentences_csv);
std::vector<Sentence> read_sentences(const std::filesystem::path& sentences_csv, std::string_view doc_id);

/// Splits `text`, replaces every existing row of doc.doc_id in
/// `sentences_csv` with the new sentences and returns them. Throws
/// EmptyDocumentError when no sentence survives splitting.
std::vector<Sentence> ingest_document(const Document& doc, std::string_view text,
                                      const std::filesystem::path& sentences_csv);

}  // namespace themescope::corpus
