#include "tcheby/vocab.hpp"

#include <stdexcept>

namespace tcheby {

Vocabulary::Vocabulary(const std::string& letters) : letters_(letters) {
    if (letters.empty()) throw std::invalid_argument("Vocabulary: empty alphabet");
    for (int& v : char_map_) v = -1;
    for (int i = 0; i < static_cast<int>(letters_.size()); ++i) {
        const auto c = static_cast<unsigned char>(letters_[static_cast<std::size_t>(i)]);
        if (char_map_[c] != -1) throw std::invalid_argument("Vocabulary: duplicate letter in alphabet");
        char_map_[c] = 2 + i;
    }
}

Vocabulary Vocabulary::amino_acid() { return Vocabulary("ACDEFGHIKLMNPQRSTVWY"); }

int Vocabulary::token_of(char c) const { return char_map_[static_cast<unsigned char>(c)]; }

char Vocabulary::letter_of(int token) const {
    if (token < 2 || token >= size()) throw std::out_of_range("Vocabulary::letter_of: not a letter token");
    return letters_[static_cast<std::size_t>(token - 2)];
}

TokenSeq Vocabulary::encode(const std::string& s) const {
    TokenSeq out;
    out.reserve(s.size());
    for (char c : s) {
        const int t = token_of(c);
        if (t < 0) throw std::invalid_argument(std::string("Vocabulary: character '") + c + "' not in alphabet");
        out.push_back(t);
    }
    return out;
}

std::string Vocabulary::decode(const TokenSeq& seq) const {
    std::string out;
    out.reserve(seq.size());
    for (int t : seq) out.push_back(letter_of(t));
    return out;
}

}  // namespace tcheby
