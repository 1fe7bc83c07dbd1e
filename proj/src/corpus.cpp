#include "themescope/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <mutex>
#include <set>

#include "themescope/csv.hpp"
#include "themescope/error.hpp"

namespace themescope::corpus {

namespace {

const csv::Row kManifestHeader{"doc_id", "title", "issuer", "doc_type", "year", "era"};
const csv::Row kSentencesHeader{"doc_id", "sentence_index", "text"};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

// Serializes writers of sentences.csv within this process.
std::mutex& sentences_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

std::string_view to_string(DocType type) {
    switch (type) {
        case DocType::recommendation: return "recommendation";
        case DocType::guideline: return "guideline";
        case DocType::legislation: return "legislation";
        case DocType::code_of_practice: return "code_of_practice";
    }
    return "";
}

std::string_view to_string(Era era) {
    return era == Era::pre_ai_act ? "pre_ai_act" : "post_ai_act";
}

DocType parse_doc_type(std::string_view token) {
    for (auto t : {DocType::recommendation, DocType::guideline, DocType::legislation, DocType::code_of_practice}) {
        if (to_string(t) == token) return t;
    }
    throw ManifestError("unknown doc_type '" + std::string(token) + "'");
}

Era parse_era(std::string_view token) {
    if (token == "pre_ai_act") return Era::pre_ai_act;
    if (token == "post_ai_act") return Era::post_ai_act;
    throw ManifestError("unknown era '" + std::string(token) + "'");
}

std::vector<Document> parse_manifest(std::string_view text) {
    std::vector<csv::Row> rows;
    try {
        rows = csv::parse(text);
    } catch (const FormatError& e) {
        throw ManifestError(e.what());
    }
    if (rows.empty() || rows.front() != kManifestHeader) {
        throw ManifestError("manifest header must be '" + csv::format_row(kManifestHeader) + "'");
    }
    std::vector<Document> docs;
    std::set<std::string> seen;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::string where = "row " + std::to_string(r);
        if (row.size() != kManifestHeader.size()) {
            throw ManifestError(where + ": expected 6 fields, got " + std::to_string(row.size()));
        }
        Document doc;
        doc.doc_id = std::string(trim(row[0]));
        if (doc.doc_id.empty()) throw ManifestError(where + ": missing doc_id");
        if (!seen.insert(doc.doc_id).second) throw ManifestError(where + ": duplicate doc_id '" + doc.doc_id + "'");
        doc.title = row[1];
        doc.issuer = row[2];
        try {
            doc.doc_type = parse_doc_type(trim(row[3]));
            doc.era = parse_era(trim(row[5]));
            doc.year = io::parse_int(trim(row[4]), "year");
        } catch (const Error& e) {
            throw ManifestError(where + ": " + e.what());
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<Document> load_manifest(const std::filesystem::path& path) {
    return parse_manifest(io::read_text(path));
}

std::string format_manifest(const std::vector<Document>& docs) {
    std::vector<csv::Row> rows;
    for (const auto& d : docs) {
        rows.push_back({d.doc_id, d.title, d.issuer, std::string(to_string(d.doc_type)), std::to_string(d.year),
                        std::string(to_string(d.era))});
    }
    return csv::format_table(kManifestHeader, rows);
}

void save_manifest(const std::filesystem::path& path, const std::vector<Document>& docs) {
    io::atomic_write(path, format_manifest(docs));
}

const std::vector<std::string>& abbreviations() {
    // abbrev-v1. Matched case-sensitively against the whitespace-delimited
    // word (leading brackets stripped) that ends at the terminator.
    static const std::vector<std::string> list = {
        "Art.",  "Arts.", "art.",  "No.",   "no.",   "Nos.",  "e.g.",  "i.e.",  "Dr.",   "Mr.",   "Mrs.",
        "Ms.",   "Prof.", "vs.",   "etc.",  "cf.",   "al.",   "Fig.",  "Figs.", "Sec.",  "Ch.",   "Vol.",
        "pp.",   "p.",    "para.", "Para.", "paras.", "Rec.", "Reg.",  "Dir.",  "Inc.",  "Ltd.",  "Co.",
        "Corp.", "St.",   "Jr.",   "Sr.",   "approx.", "Eq.", "Ref.",  "Tab.",  "ibid.", "op.",   "viz.",
        "Jan.",  "Feb.",  "Mar.",  "Apr.",  "Jun.",  "Jul.",  "Aug.",  "Sep.",  "Sept.", "Oct.",  "Nov.",
        "Dec.",  "U.S.",  "U.K.",  "E.U.",  "OJ.",
    };
    return list;
}

std::vector<std::string> split_sentences(std::string_view text) {
    static const std::set<std::string, std::less<>> abbrev(abbreviations().begin(), abbreviations().end());

    auto ends_with_abbreviation = [&](std::size_t terminator) {
        std::size_t start = terminator;
        while (start > 0 && !is_space(text[start - 1])) --start;
        std::string_view word = text.substr(start, terminator - start + 1);
        while (!word.empty() && (word.front() == '(' || word.front() == '[' || word.front() == '"')) {
            word.remove_prefix(1);
        }
        return abbrev.contains(word);
    };

    std::vector<std::string> out;
    std::size_t begin = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        std::size_t j = i + 1;
        if (j >= text.size() || !is_space(text[j])) continue;
        while (j < text.size() && is_space(text[j])) ++j;
        if (j >= text.size()) continue;
        const unsigned char next = static_cast<unsigned char>(text[j]);
        if (!std::isupper(next) && !std::isdigit(next)) continue;
        if (c == '.' && ends_with_abbreviation(i)) continue;
        auto piece = trim(text.substr(begin, i + 1 - begin));
        if (!piece.empty()) out.emplace_back(piece);
        begin = i + 1;
    }
    auto tail = trim(text.substr(std::min(begin, text.size())));
    if (!tail.empty()) out.emplace_back(tail);
    return out;
}

std::vector<Sentence> read_sentences(const std::filesystem::path& sentences_csv) {
    auto table = csv::read_file(sentences_csv, kSentencesHeader);
    std::vector<Sentence> out;
    out.reserve(table.rows.size());
    for (auto& row : table.rows) {
        if (row.size() != 3) throw FormatError(sentences_csv.string() + ": malformed row");
        out.push_back({row[0], io::parse_int(row[1], "sentence_index"), std::move(row[2])});
    }
    return out;
}

std::vector<Sentence> read_sentences(const std::filesystem::path& sentences_csv, std::string_view doc_id) {
    auto all = read_sentences(sentences_csv);
    std::erase_if(all, [&](const Sentence& s) { return s.doc_id != doc_id; });
    std::sort(all.begin(), all.end(), [](const Sentence& a, const Sentence& b) { return a.index < b.index; });
    return all;
}

std::vector<Sentence> ingest_document(const Document& doc, std::string_view text,
                                      const std::filesystem::path& sentences_csv) {
    auto pieces = split_sentences(text);
    if (pieces.empty()) throw EmptyDocumentError("document " + doc.doc_id + " has no sentences");

    std::vector<Sentence> fresh;
    fresh.reserve(pieces.size());
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        fresh.push_back({doc.doc_id, static_cast<int>(i), std::move(pieces[i])});
    }

    std::lock_guard lock(sentences_mutex());
    std::vector<Sentence> all;
    if (std::filesystem::exists(sentences_csv)) all = read_sentences(sentences_csv);
    std::erase_if(all, [&](const Sentence& s) { return s.doc_id == doc.doc_id; });
    all.insert(all.end(), fresh.begin(), fresh.end());
    std::stable_sort(all.begin(), all.end(), [](const Sentence& a, const Sentence& b) {
        return std::tie(a.doc_id, a.index) < std::tie(b.doc_id, b.index);
    });

    std::vector<csv::Row> rows;
    rows.reserve(all.size());
    for (const auto& s : all) rows.push_back({s.doc_id, std::to_string(s.index), s.text});
    io::atomic_write(sentences_csv, csv::format_table(kSentencesHeader, rows));
    return fresh;
}

}  // namespace themescope::corpus
