#include <cstdint>

#include "roleplay/metrics.hpp"

namespace roleplay {

namespace {

constexpr char32_t kInvalid = 0xFFFFFFFF;

// Decodes one code point at `i`, advancing it. Malformed sequences yield kInvalid.
char32_t next_code_point(std::string_view s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int len = b0 < 0x80 ? 1 : (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xE ? 3 : (b0 >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + static_cast<std::size_t>(len) > s.size()) {
        ++i;
        return kInvalid;
    }
    char32_t cp = len == 1 ? b0 : len == 2 ? (b0 & 0x1F) : len == 3 ? (b0 & 0x0F) : (b0 & 0x07);
    for (int k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
        if ((b >> 6) != 0x2) {
            ++i;
            return kInvalid;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    i += static_cast<std::size_t>(len);
    return cp;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

bool is_cjk_ideograph(char32_t c) {
    return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) || (c >= 0xF900 && c <= 0xFAFF) ||
           (c >= 0x20000 && c <= 0x2FFFF);
}

bool is_ascii_digit(char32_t c) { return c >= '0' && c <= '9'; }

bool is_word_char(char32_t c) {
    if (c == kInvalid) return false;
    if (c < 0x80) return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || is_ascii_digit(c);
    if (c <= 0xBF || c == 0xD7 || c == 0xF7) return false;     // Latin-1 punctuation and signs
    if (c >= 0x2000 && c <= 0x2BFF) return false;               // punctuation, symbols, arrows
    if (c >= 0x3000 && c <= 0x303F) return false;               // CJK punctuation
    if (c >= 0xFE30 && c <= 0xFE4F) return false;               // CJK compatibility forms
    if ((c >= 0xFF00 && c <= 0xFF0F) || (c >= 0xFF1A && c <= 0xFF20) || (c >= 0xFF3B && c <= 0xFF40) ||
        (c >= 0xFF5B && c <= 0xFF65))
        return false;                                            // fullwidth punctuation
    if (c >= 0x1F000 && c <= 0x1FAFF) return false;             // emoji and pictographs
    if (c >= 0xFFF0 && c <= 0xFFFF) return false;               // specials
    return true;
}

bool is_letter(char32_t c) { return is_word_char(c) && !is_ascii_digit(c); }

char32_t to_lower(char32_t c) {
    if (c >= 'A' && c <= 'Z') return c + 32;
    if (c < 0xC0) return c;
    if (c <= 0xDE && c != 0xD7) return c + 32;
    if (c >= 0x100 && c <= 0x137) return (c % 2 == 0) ? c + 1 : c;
    if (c >= 0x139 && c <= 0x148) return (c % 2 == 1) ? c + 1 : c;
    if (c >= 0x14A && c <= 0x177) return (c % 2 == 0) ? c + 1 : c;
    if (c == 0x178) return 0xFF;
    if (c >= 0x179 && c <= 0x17E) return (c % 2 == 1) ? c + 1 : c;
    if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 32;
    if (c >= 0x410 && c <= 0x42F) return c + 32;
    if (c >= 0x400 && c <= 0x40F) return c + 80;
    return c;
}

}  // namespace

TokenList tokenize(std::string_view text) {
    std::vector<char32_t> cps;
    cps.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) cps.push_back(next_code_point(text, i));

    TokenList out;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) out.tokens_.push_back(std::move(current));
        current.clear();
    };
    for (std::size_t i = 0; i < cps.size(); ++i) {
        const char32_t c = cps[i];
        if (is_cjk_ideograph(c)) {
            flush();
            append_utf8(current, c);
            flush();
            continue;
        }
        if (is_word_char(c)) {
            append_utf8(current, to_lower(c));
            continue;
        }
        const bool has_prev = !current.empty() && i > 0;
        const bool has_next = i + 1 < cps.size();
        if (has_prev && has_next && (c == '\'' || c == 0x2019) && is_letter(cps[i - 1]) && is_letter(cps[i + 1]) &&
            !is_cjk_ideograph(cps[i + 1])) {
            current += '\'';
            continue;
        }
        if (has_prev && has_next && (c == '.' || c == ',') && is_ascii_digit(cps[i - 1]) &&
            is_ascii_digit(cps[i + 1])) {
            current += static_cast<char>(c);
            continue;
        }
        flush();
    }
    flush();
    return out;
}

const std::set<std::string, std::less<>>& default_stopwords() {
    static const std::set<std::string, std::less<>> words = {
        "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as", "at",
        "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could",
        "did", "do", "does", "doing", "down", "during", "each", "few", "for", "from", "further", "had", "has",
        "have", "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how", "i", "i'm",
        "i'll", "i've", "i'd", "if", "in", "into", "is", "it", "it's", "its", "itself", "just", "let's", "me",
        "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or",
        "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she", "should", "so", "some",
        "such", "than", "that", "that's", "the", "their", "theirs", "them", "themselves", "then", "there",
        "there's", "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "very",
        "was", "we", "were", "what", "what's", "when", "where", "which", "while", "who", "whom", "why", "will",
        "with", "would", "you", "you're", "you've", "you'll", "your", "yours", "yourself", "yourselves"};
    return words;
}

TokenList without_stopwords(const TokenList& tokens, const std::set<std::string, std::less<>>& stop) {
    TokenList out;
    for (const auto& t : tokens.tokens())
        if (!stop.contains(t)) out.tokens_.push_back(t);
    return out;
}

}  // namespace roleplay
