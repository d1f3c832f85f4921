#pragma once

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vqaadv {

/// Byte range of one token in its source string.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool operator==(const Span &) const = default;
};

/// Canonical tokenization shared by metrics, noun extraction and vocabulary mapping.
struct TokenSeq {
    std::vector<std::string> tokens;
    std::vector<Span> spans;

    std::size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }
    const std::string &operator[](std::size_t i) const { return tokens[i]; }
};

namespace detail {

inline bool is_unicode_space(char32_t c) {
    return (c >= 0x09 && c <= 0x0d) || c == 0x20 || c == 0x85 || c == 0xa0 || c == 0x1680 ||
           (c >= 0x2000 && c <= 0x200a) || c == 0x2028 || c == 0x2029 || c == 0x202f ||
           c == 0x205f || c == 0x3000;
}

inline bool is_unicode_punct(char32_t c) {
    if (c < 0x80)
        return (c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) || (c >= 0x5b && c <= 0x60) ||
               (c >= 0x7b && c <= 0x7e);
    return (c >= 0xa1 && c <= 0xbf) || c == 0xd7 || c == 0xf7 || (c >= 0x2010 && c <= 0x2027) ||
           (c >= 0x2030 && c <= 0x205e) || (c >= 0x3001 && c <= 0x3003) ||
           (c >= 0x3008 && c <= 0x3011) || (c >= 0x3014 && c <= 0x301f) ||
           (c >= 0xff01 && c <= 0xff0f) || (c >= 0xff1a && c <= 0xff20) ||
           (c >= 0xff3b && c <= 0xff40) || (c >= 0xff5b && c <= 0xff65);
}

// Simple case folding for the scripts that show up in VQA text. Every mapped
// value lies outside the mapped domain, so folding is idempotent.
inline char32_t to_lower(char32_t c) {
    if (c >= 'A' && c <= 'Z')
        return c + 0x20;
    if (c >= 0xc0 && c <= 0xde && c != 0xd7)
        return c + 0x20;
    if (((c >= 0x100 && c <= 0x137) || (c >= 0x14a && c <= 0x177)) && c % 2 == 0)
        return c + 1;
    if (c >= 0x391 && c <= 0x3a9 && c != 0x3a2)
        return c + 0x20;
    if (c >= 0x410 && c <= 0x42f)
        return c + 0x20;
    if (c >= 0x400 && c <= 0x40f)
        return c + 0x50;
    return c;
}

/// Decodes one code point starting at `i`; invalid sequences decode as the
/// single raw byte (mapped into the private range so it is never a separator).
inline char32_t decode_utf8(std::string_view s, std::size_t &i) {
    auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
    unsigned char b0 = byte(i);
    auto raw = [&] {
        ++i;
        return static_cast<char32_t>(0xf700 + b0);
    };
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    std::size_t len = (b0 & 0xe0) == 0xc0 ? 2 : (b0 & 0xf0) == 0xe0 ? 3 : (b0 & 0xf8) == 0xf0 ? 4 : 0;
    if (len == 0 || i + len > s.size())
        return raw();
    char32_t cp = b0 & (0xff >> (len + 1));
    for (std::size_t k = 1; k < len; ++k) {
        if ((byte(i + k) & 0xc0) != 0x80)
            return raw();
        cp = (cp << 6) | (byte(i + k) & 0x3f);
    }
    i += len;
    return cp;
}

inline void encode_utf8(char32_t c, std::string &out) {
    if (c >= 0xf780 && c <= 0xf7ff) { // raw byte passthrough
        out.push_back(static_cast<char>(c - 0xf700));
    } else if (c < 0x80) {
        out.push_back(static_cast<char>(c));
    } else if (c < 0x800) {
        out.push_back(static_cast<char>(0xc0 | (c >> 6)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3f)));
    } else if (c < 0x10000) {
        out.push_back(static_cast<char>(0xe0 | (c >> 12)));
        out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3f)));
    } else {
        out.push_back(static_cast<char>(0xf0 | (c >> 18)));
        out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3f)));
    }
}

} // namespace detail

/// Lowercases and splits on Unicode whitespace and punctuation; punctuation is dropped.
inline TokenSeq tokenize(std::string_view text) {
    TokenSeq seq;
    std::string current;
    std::size_t start = 0;
    std::size_t i = 0;
    auto flush = [&](std::size_t end) {
        if (!current.empty()) {
            seq.tokens.push_back(std::move(current));
            seq.spans.push_back({start, end});
            current.clear();
        }
    };
    while (i < text.size()) {
        std::size_t at = i;
        char32_t c = detail::decode_utf8(text, i);
        if (detail::is_unicode_space(c) || detail::is_unicode_punct(c)) {
            flush(at);
            continue;
        }
        if (current.empty())
            start = at;
        detail::encode_utf8(detail::to_lower(c), current);
    }
    flush(text.size());
    return seq;
}

inline std::string join(const std::vector<std::string> &tokens, std::string_view sep = " ") {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i)
            out += sep;
        out += tokens[i];
    }
    return out;
}

inline std::string join(const TokenSeq &seq, std::string_view sep = " ") {
    return join(seq.tokens, sep);
}

/// Lowercased, punctuation-free, single-spaced form of `text`.
inline std::string normalize_text(std::string_view text) { return join(tokenize(text)); }

inline std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b])))
        ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])))
        --e;
    return std::string(s.substr(b, e - b));
}

} // namespace vqaadv
