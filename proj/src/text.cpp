#include "memfly/text.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_set>

namespace memfly::text {

namespace {

bool word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

const std::unordered_set<std::string_view>& stop_words() {
    static const std::unordered_set<std::string_view> words = {
        // articles, pronouns, determiners
        "a", "an", "the", "this", "that", "these", "those", "i", "me", "my", "mine", "myself", "we", "us", "our",
        "ours", "you", "your", "yours", "he", "him", "his", "she", "her", "hers", "it", "its", "they", "them",
        "their", "theirs", "someone", "something", "anything", "everything", "nothing", "some", "any", "all",
        "each", "every", "both", "either", "neither", "other", "another", "such", "own", "same",
        // prepositions and conjunctions
        "of", "in", "on", "at", "to", "for", "from", "by", "with", "about", "into", "onto", "over", "under",
        "after", "before", "during", "since", "until", "up", "down", "out", "off", "through", "between",
        "and", "or", "but", "nor", "so", "yet", "if", "than", "then", "because", "while", "as", "though",
        // question words
        "what", "which", "who", "whom", "whose", "when", "where", "why", "how",
        // auxiliaries and high-frequency verbs
        "is", "am", "are", "was", "were", "be", "been", "being", "do", "does", "did", "done", "doing", "have",
        "has", "had", "having", "will", "would", "shall", "should", "can", "could", "may", "might", "must",
        "go", "goes", "went", "gone", "going", "get", "gets", "got", "getting", "make", "makes", "made",
        "say", "says", "said", "tell", "told", "think", "thinks", "thought", "know", "knows", "knew", "want",
        "wants", "wanted", "like", "likes", "liked", "feel", "feels", "felt", "see", "saw", "seen", "come",
        "came", "take", "took", "taken", "give", "gave", "given", "buy", "buys", "bought", "use", "used",
        "let", "keep", "kept", "put", "find", "found", "look", "looking",
        // adverbs and fillers
        "not", "no", "yes", "yeah", "very", "really", "just", "also", "too", "still", "even", "ever", "never",
        "always", "often", "again", "here", "there", "now", "well", "much", "many", "more", "most", "lot",
        "lots", "only", "quite", "pretty", "maybe", "perhaps", "actually", "definitely", "totally", "kind",
        "sort", "thing", "things", "way", "one",
        // phatic
        "wow", "cool", "oh", "ah", "hey", "hi", "hello", "thanks", "thank", "great", "nice", "awesome", "ok",
        "okay", "sure", "lol", "haha", "amazing", "good", "bye", "glad", "sounds", "sound",
    };
    return words;
}

} // namespace

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        const auto c = static_cast<unsigned char>(ch);
        if (word_byte(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string singularize(std::string_view word) {
    std::string w(word);
    if (w.size() < 4) return w;
    if (ends_with(w, "ies")) return w.substr(0, w.size() - 3) + "y";
    if (ends_with(w, "sses") || ends_with(w, "xes") || ends_with(w, "ches") || ends_with(w, "shes")) {
        return w.substr(0, w.size() - 2);
    }
    if (ends_with(w, "ss") || ends_with(w, "us") || ends_with(w, "is")) return w;
    if (w.back() == 's') w.pop_back();
    return w;
}

std::string canonical_keyword(std::string_view phrase) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : trim(phrase)) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) words.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    if (words.empty()) return {};
    // strip surrounding punctuation from the phrase ends
    auto strip = [](std::string& w) {
        while (!w.empty() && std::ispunct(static_cast<unsigned char>(w.back()))) w.pop_back();
        std::size_t b = 0;
        while (b < w.size() && std::ispunct(static_cast<unsigned char>(w[b]))) ++b;
        w.erase(0, b);
    };
    strip(words.front());
    strip(words.back());
    std::erase_if(words, [](const std::string& w) { return w.empty(); });
    if (words.empty()) return {};
    words.back() = singularize(words.back());
    return join(words, " ");
}

bool is_stop_word(std::string_view lowered_token) {
    return lowered_token.size() < 2 || stop_words().contains(lowered_token);
}

std::vector<std::string> content_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& tok : tokenize(s)) {
        if (is_stop_word(tok)) continue;
        if (std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); })) continue;
        std::string canon = singularize(tok);
        if (is_stop_word(canon)) continue;
        if (seen.insert(canon).second) out.push_back(std::move(canon));
    }
    return out;
}

std::string truncate_words(std::string_view s, std::size_t max_words) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : s) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) words.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    if (words.size() > max_words) words.resize(max_words);
    return join(words, " ");
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

} // namespace memfly::text
