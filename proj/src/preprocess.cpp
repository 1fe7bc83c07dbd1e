#include "themescope/preprocess.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>

#include "themescope/csv.hpp"
#include "themescope/error.hpp"

namespace themescope::preprocess {

namespace detail {
extern const std::string_view kDefaultStopwordsText;
}

namespace {

struct CodePoint {
    char32_t value;
    std::size_t length;  // bytes consumed
};

// Malformed sequences decode as U+FFFD consuming one byte.
CodePoint decode_utf8(std::string_view s, std::size_t i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) return {b0, 1};
    auto cont = [&](std::size_t k) {
        return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
    };
    auto bits = [&](std::size_t k) { return static_cast<char32_t>(static_cast<unsigned char>(s[i + k]) & 0x3F); };
    if ((b0 & 0xE0) == 0xC0 && cont(1)) {
        char32_t cp = ((b0 & 0x1F) << 6) | bits(1);
        if (cp >= 0x80) return {cp, 2};
    } else if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
        char32_t cp = ((b0 & 0x0F) << 12) | (bits(1) << 6) | bits(2);
        if (cp >= 0x800) return {cp, 3};
    } else if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
        char32_t cp = ((b0 & 0x07) << 18) | (bits(1) << 12) | (bits(2) << 6) | bits(3);
        if (cp >= 0x10000 && cp <= 0x10FFFF) return {cp, 4};
    }
    return {0xFFFD, 1};
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool is_letter(char32_t cp) {
    if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) return true;
    if (cp >= 0xC0 && cp <= 0x24F) return cp != 0xD7 && cp != 0xF7;
    return false;
}

bool is_digit(char32_t cp) { return cp >= '0' && cp <= '9'; }

char32_t to_lower(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 32;
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;
    // Latin Extended-A pairs upper/lower on even/odd code points in these runs.
    if ((cp >= 0x100 && cp <= 0x137) || (cp >= 0x14A && cp <= 0x177)) return cp | 1;
    if ((cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E)) return (cp & 1) ? cp + 1 : cp;
    return cp;
}

std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

Tokens normalize_sentence(std::string_view raw) {
    std::vector<std::u32string> pieces;
    std::u32string current;
    for (std::size_t i = 0; i < raw.size();) {
        auto [cp, len] = decode_utf8(raw, i);
        i += len;
        if (is_letter(cp) || is_digit(cp)) {
            current.push_back(cp);
        } else if (!current.empty()) {
            pieces.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) pieces.push_back(std::move(current));

    Tokens out;
    for (auto& piece : pieces) {
        // (1) lowercase
        for (auto& cp : piece) cp = to_lower(cp);
        // (2) tokens without any alphabetic character
        if (std::none_of(piece.begin(), piece.end(), is_letter)) continue;
        // (3) digit-only tokens; already excluded by (2), kept as its own rule
        if (std::all_of(piece.begin(), piece.end(), is_digit)) continue;
        // (4) shorter than two characters
        if (piece.size() < 2) continue;
        std::string token;
        for (auto cp : piece) append_utf8(token, cp);
        out.push_back(std::move(token));
    }
    return out;
}

const StopWords& StopWords::builtin() {
    static const StopWords words = from_text(detail::kDefaultStopwordsText);
    return words;
}

StopWords StopWords::from_text(std::string_view text) {
    StopWords sw;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
        while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
        if (!line.empty()) sw.words_.emplace(line);
        pos = nl + 1;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
    sw.id_ = std::string("fnv1a64:") + buf;
    return sw;
}

StopWords StopWords::load(const std::filesystem::path& path) {
    return from_text(io::read_text(path));
}

long Vocabulary::index_of(std::string_view term) const {
    auto it = std::lower_bound(terms.begin(), terms.end(), term);
    if (it == terms.end() || *it != term) return -1;
    return it - terms.begin();
}

Vocabulary build_vocabulary(std::span<const Tokens> corpus, int min_df, const StopWords& stopwords) {
    if (min_df < 1) throw ParamError("min_df must be >= 1");
    if (corpus.empty()) throw ParamError("build_vocabulary needs a non-empty corpus");

    std::map<std::string, int, std::less<>> df;
    for (const auto& sentence : corpus) {
        std::set<std::string_view> unique(sentence.begin(), sentence.end());
        for (auto term : unique) {
            auto it = df.find(term);
            if (it == df.end()) {
                df.emplace(std::string(term), 1);
            } else {
                ++it->second;
            }
        }
    }

    Vocabulary vocab;
    vocab.stopword_list_id = stopwords.id();
    for (const auto& [term, count] : df) {
        if (count < min_df || stopwords.contains(term)) continue;
        vocab.terms.push_back(term);
        vocab.doc_frequencies.push_back(count);
    }
    if (vocab.terms.empty()) throw EmptyVocabularyError("no term survives min_df and stop-word filtering");
    return vocab;
}

}  // namespace themescope::preprocess
