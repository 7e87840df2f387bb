#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mbti {

/// Uncased WordPiece tokenizer: whitespace/punctuation splitting,
/// lowercasing, accent stripping, then greedy longest-match subwords with
/// the "##" continuation prefix.
class WordPiece {
public:
    WordPiece() = default;
    explicit WordPiece(std::vector<std::string> vocab, bool lowercase = true);

    static WordPiece load(const std::filesystem::path& vocab_file, bool lowercase = true);

    std::vector<std::string> basic_tokens(std::string_view text) const;
    std::vector<int> encode(std::string_view text) const;

    int id(const std::string& token) const;
    const std::string& token(int id) const { return vocab_[static_cast<std::size_t>(id)]; }
    std::size_t size() const { return vocab_.size(); }

    int unk_id() const { return unk_; }
    int cls_id() const { return cls_; }
    int sep_id() const { return sep_; }
    int pad_id() const { return pad_; }

private:
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, int> index_;
    bool lowercase_ = true;
    int unk_ = 0, cls_ = 0, sep_ = 0, pad_ = 0;
    std::size_t max_chars_ = 100;
};

} // namespace mbti
