#pragma once

#include <string>
#include <vector>

namespace tcheby {

using TokenSeq = std::vector<int>;

// Token inventory shared by datasets, policies and samplers. Index 0 is BOS
// (never emitted), index 1 is EOS; letters follow.
class Vocabulary {
public:
    static constexpr int kBos = 0;
    static constexpr int kEos = 1;

    Vocabulary() = default;
    explicit Vocabulary(const std::string& letters);

    static Vocabulary amino_acid();  // the 20 canonical residues

    int size() const { return static_cast<int>(2 + letters_.size()); }
    int letter_count() const { return static_cast<int>(letters_.size()); }
    const std::string& letters() const { return letters_; }

    bool is_special(int token) const { return token == kBos || token == kEos; }
    bool valid(int token) const { return token >= 0 && token < size(); }

    int token_of(char c) const;       // -1 if unknown
    char letter_of(int token) const;  // letters only

    TokenSeq encode(const std::string& s) const;  // throws on unknown character
    std::string decode(const TokenSeq& seq) const;

    bool operator==(const Vocabulary& other) const { return letters_ == other.letters_; }

private:
    std::string letters_;
    int char_map_[256] = {};
};

}  // namespace tcheby
