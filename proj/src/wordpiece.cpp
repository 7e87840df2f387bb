#include "mbti/wordpiece.hpp"

#include <fstream>

#include <fmt/format.h>

#include "mbti/error.hpp"
#include "mbti/unicode.hpp"

namespace mbti {

namespace {

bool is_control(char32_t c) {
    if (c == U'\t' || c == U'\n' || c == U'\r') return false;
    return c < 0x20 || (c >= 0x7f && c < 0xa0) || c == 0xfffd;
}

bool is_cjk(char32_t c) {
    return (c >= 0x4e00 && c <= 0x9fff) || (c >= 0x3400 && c <= 0x4dbf) || (c >= 0x20000 && c <= 0x2a6df) ||
           (c >= 0x2a700 && c <= 0x2b73f) || (c >= 0x2b740 && c <= 0x2b81f) || (c >= 0x2b820 && c <= 0x2ceaf) ||
           (c >= 0xf900 && c <= 0xfaff) || (c >= 0x2f800 && c <= 0x2fa1f);
}

bool is_bert_punct(char32_t c) {
    if ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126)) return true;
    return unicode::is_punct(c);
}

bool is_combining(char32_t c) { return (c >= 0x300 && c <= 0x36f); }

} // namespace

WordPiece::WordPiece(std::vector<std::string> vocab, bool lowercase)
    : vocab_(std::move(vocab)), lowercase_(lowercase) {
    for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], static_cast<int>(i));
    auto need = [&](const char* t) {
        auto it = index_.find(t);
        if (it == index_.end()) throw DataError(fmt::format("vocabulary lacks special token {}", t));
        return it->second;
    };
    unk_ = need("[UNK]");
    cls_ = need("[CLS]");
    sep_ = need("[SEP]");
    pad_ = need("[PAD]");
}

WordPiece WordPiece::load(const std::filesystem::path& vocab_file, bool lowercase) {
    std::ifstream in(vocab_file);
    if (!in) throw IoError(fmt::format("cannot open vocabulary {}", vocab_file.string()));
    std::vector<std::string> vocab;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        vocab.push_back(line);
    }
    return WordPiece(std::move(vocab), lowercase);
}

int WordPiece::id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? unk_ : it->second;
}

std::vector<std::string> WordPiece::basic_tokens(std::string_view text) const {
    std::vector<std::string> out;
    std::u32string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(unicode::encode(cur));
        cur.clear();
    };
    for (char32_t c : unicode::decode(text)) {
        if (c == 0 || is_control(c)) continue;
        if (unicode::is_space(c)) {
            flush();
            continue;
        }
        if (lowercase_) {
            c = unicode::to_lower(c);
            if (is_combining(c)) continue;
            c = unicode::strip_accent(c);
        }
        if (is_bert_punct(c) || is_cjk(c)) {
            flush();
            cur.push_back(c);
            flush();
            continue;
        }
        cur.push_back(c);
    }
    flush();
    return out;
}

std::vector<int> WordPiece::encode(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& word : basic_tokens(text)) {
        const std::u32string cps = unicode::decode(word);
        if (cps.size() > max_chars_) {
            ids.push_back(unk_);
            continue;
        }
        std::vector<int> pieces;
        std::size_t start = 0;
        bool bad = false;
        while (start < cps.size()) {
            std::size_t end = cps.size();
            int found = -1;
            while (start < end) {
                std::string sub = unicode::encode(cps.substr(start, end - start));
                if (start > 0) sub = "##" + sub;
                auto it = index_.find(sub);
                if (it != index_.end()) {
                    found = it->second;
                    break;
                }
                --end;
            }
            if (found < 0) {
                bad = true;
                break;
            }
            pieces.push_back(found);
            start = end;
        }
        if (bad)
            ids.push_back(unk_);
        else
            ids.insert(ids.end(), pieces.begin(), pieces.end());
    }
    return ids;
}

} // namespace mbti
