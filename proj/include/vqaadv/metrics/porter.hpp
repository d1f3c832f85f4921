#pragma once

#include <string>
#include <string_view>

namespace vqaadv::metrics {

/// Porter (1980) suffix-stripping stemmer for lowercase ASCII words.
/// Words with non-letters or fewer than three characters are returned as-is.
class PorterStemmer {
  public:
    std::string operator()(std::string_view word) const {
        if (word.size() < 3)
            return std::string(word);
        for (char c : word)
            if (c < 'a' || c > 'z')
                return std::string(word);
        std::string w(word);
        step1a(w);
        step1b(w);
        step1c(w);
        step2(w);
        step3(w);
        step4(w);
        step5(w);
        return w;
    }

  private:
    static bool cons(const std::string &w, std::size_t i) {
        switch (w[i]) {
        case 'a':
        case 'e':
        case 'i':
        case 'o':
        case 'u':
            return false;
        case 'y':
            return i == 0 ? true : !cons(w, i - 1);
        default:
            return true;
        }
    }

    // Number of VC sequences in w[0, len).
    static int measure(const std::string &w, std::size_t len) {
        int m = 0;
        std::size_t i = 0;
        while (i < len && cons(w, i))
            ++i;
        while (i < len) {
            while (i < len && !cons(w, i))
                ++i;
            if (i >= len)
                break;
            while (i < len && cons(w, i))
                ++i;
            ++m;
        }
        return m;
    }

    static bool has_vowel(const std::string &w, std::size_t len) {
        for (std::size_t i = 0; i < len; ++i)
            if (!cons(w, i))
                return true;
        return false;
    }

    static bool double_cons(const std::string &w, std::size_t len) {
        return len >= 2 && w[len - 1] == w[len - 2] && cons(w, len - 1);
    }

    // cvc where the final c is not w, x or y.
    static bool cvc(const std::string &w, std::size_t len) {
        if (len < 3 || !cons(w, len - 1) || cons(w, len - 2) || !cons(w, len - 3))
            return false;
        char c = w[len - 1];
        return c != 'w' && c != 'x' && c != 'y';
    }

    static bool ends(const std::string &w, std::string_view s) {
        return w.size() >= s.size() && w.compare(w.size() - s.size(), s.size(), s) == 0;
    }

    // Replaces suffix `s` with `r` when the stem before it has measure > min_m.
    static bool replace_if(std::string &w, std::string_view s, std::string_view r, int min_m) {
        if (!ends(w, s))
            return false;
        std::size_t stem = w.size() - s.size();
        if (measure(w, stem) > min_m)
            w = w.substr(0, stem) + std::string(r);
        return true;
    }

    static void step1a(std::string &w) {
        if (ends(w, "sses"))
            w.resize(w.size() - 2);
        else if (ends(w, "ies"))
            w.resize(w.size() - 2);
        else if (ends(w, "ss"))
            return;
        else if (ends(w, "s"))
            w.resize(w.size() - 1);
    }

    static void step1b(std::string &w) {
        if (ends(w, "eed")) {
            if (measure(w, w.size() - 3) > 0)
                w.resize(w.size() - 1);
            return;
        }
        std::size_t cut = 0;
        if (ends(w, "ed") && has_vowel(w, w.size() - 2))
            cut = 2;
        else if (ends(w, "ing") && has_vowel(w, w.size() - 3))
            cut = 3;
        if (cut == 0)
            return;
        w.resize(w.size() - cut);
        if (ends(w, "at") || ends(w, "bl") || ends(w, "iz")) {
            w += 'e';
        } else if (double_cons(w, w.size())) {
            char c = w.back();
            if (c != 'l' && c != 's' && c != 'z')
                w.pop_back();
        } else if (measure(w, w.size()) == 1 && cvc(w, w.size())) {
            w += 'e';
        }
    }

    static void step1c(std::string &w) {
        if (ends(w, "y") && has_vowel(w, w.size() - 1))
            w.back() = 'i';
    }

    static void step2(std::string &w) {
        static constexpr std::string_view rules[][2] = {
            {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"},  {"anci", "ance"},
            {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},    {"entli", "ent"},
            {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
            {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
            {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},  {"biliti", "ble"},
        };
        for (const auto &r : rules)
            if (replace_if(w, r[0], r[1], 0))
                return;
    }

    static void step3(std::string &w) {
        static constexpr std::string_view rules[][2] = {
            {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
            {"ical", "ic"},  {"ful", ""},   {"ness", ""},
        };
        for (const auto &r : rules)
            if (replace_if(w, r[0], r[1], 0))
                return;
    }

    static void step4(std::string &w) {
        static constexpr std::string_view suffixes[] = {
            "al",  "ance", "ence", "er",  "ic",  "able", "ible", "ant", "ement", "ment",
            "ent", "ion",  "ou",   "ism", "ate", "iti",  "ous",  "ive", "ize",
        };
        // Longest matching suffix wins.
        std::string_view best;
        for (auto s : suffixes)
            if (ends(w, s) && s.size() > best.size())
                best = s;
        if (best.empty())
            return;
        std::size_t stem = w.size() - best.size();
        if (best == "ion" && !(stem > 0 && (w[stem - 1] == 's' || w[stem - 1] == 't')))
            return;
        if (measure(w, stem) > 1)
            w.resize(stem);
    }

    static void step5(std::string &w) {
        if (ends(w, "e")) {
            std::size_t stem = w.size() - 1;
            int m = measure(w, stem);
            if (m > 1 || (m == 1 && !cvc(w, stem)))
                w.resize(stem);
        }
        if (w.size() >= 2 && w.back() == 'l' && double_cons(w, w.size()) &&
            measure(w, w.size()) > 1)
            w.pop_back();
    }
};

inline std::string porter_stem(std::string_view word) { return PorterStemmer{}(word); }

} // namespace vqaadv::metrics
