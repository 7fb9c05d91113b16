#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "varith/error.hpp"

namespace varith {

inline std::int64_t pow10(int e) {
    std::int64_t v = 1;
    for (int i = 0; i < e; ++i) v *= 10;
    return v;
}

// Digits least-significant first, zero-padded to exactly M entries.
inline std::vector<int> digits_of(std::int64_t value, int M) {
    if (M < 1) throw std::invalid_argument("digits_of: M must be positive");
    if (value < 0 || value >= pow10(M))
        throw std::invalid_argument("digits_of: value out of range for M digits");
    std::vector<int> d(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m) {
        d[m] = static_cast<int>(value % 10);
        value /= 10;
    }
    return d;
}

// ---------------------------------------------------------------------------
// Decimal 1-hot: 10 entries per digit position, block m (1-based, least
// significant first) holds the 1 at index (m-1)*10 + digit.
// ---------------------------------------------------------------------------

inline std::vector<std::uint8_t> one_hot_encode(std::int64_t value, int M) {
    const std::vector<int> d = digits_of(value, M);
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(10) * M, 0);
    for (int m = 0; m < M; ++m)
        bits[static_cast<std::size_t>(m) * 10 + d[m]] = 1;
    return bits;
}

// Strict inverse: requires exactly one 1 per 10-block.
inline std::int64_t one_hot_decode(const std::vector<std::uint8_t>& bits, int M) {
    if (M < 1 || bits.size() != static_cast<std::size_t>(10) * M)
        throw std::invalid_argument("one_hot_decode: bad vector length");
    std::int64_t value = 0;
    for (int m = M - 1; m >= 0; --m) {
        int digit = -1;
        for (int d = 0; d < 10; ++d) {
            if (bits[static_cast<std::size_t>(m) * 10 + d]) {
                if (digit >= 0)
                    throw std::invalid_argument("one_hot_decode: multiple ones in a block");
                digit = d;
            }
        }
        if (digit < 0) throw std::invalid_argument("one_hot_decode: empty block");
        value = value * 10 + digit;
    }
    return value;
}

// ---------------------------------------------------------------------------
// Roman numerals, purely additive notation (4 = IIII). Symbols above M follow
// the same 1/5 alternation; the seven high symbols are stand-ins for numerals
// the original system never had.
// ---------------------------------------------------------------------------

struct RomanSymbol {
    char symbol;
    std::int64_t value;
};

// Descending by value. Alternates 5*10^k / 10^k, so greedy expansion uses at
// most 1 quinary and 4 unit symbols per decade.
inline const std::array<RomanSymbol, 14>& roman_symbols() {
    static const std::array<RomanSymbol, 14> table = {{
        {'J', 5000000},
        {'H', 1000000},
        {'G', 500000},
        {'F', 100000},
        {'E', 50000},
        {'B', 10000},
        {'A', 5000},
        {'M', 1000},
        {'D', 500},
        {'C', 100},
        {'L', 50},
        {'X', 10},
        {'V', 5},
        {'I', 1},
    }};
    return table;
}

inline constexpr std::int64_t kRomanMax = 9999999;

inline std::string to_roman(std::int64_t value) {
    if (value < 0 || value > kRomanMax)
        throw std::invalid_argument("to_roman: value out of range [0, 9999999]");
    std::string out;
    for (const auto& s : roman_symbols()) {
        while (value >= s.value) {
            out.push_back(s.symbol);
            value -= s.value;
        }
    }
    return out;  // empty for zero
}

inline std::int64_t roman_symbol_value(char c) {
    for (const auto& s : roman_symbols())
        if (s.symbol == c) return s.value;
    throw std::invalid_argument(std::string("from_roman: invalid symbol '") + c + "'");
}

// Parses canonical additive form: nonincreasing symbol values, at most 4
// copies of a unit symbol and 1 of a quinary symbol.
inline std::int64_t from_roman(const std::string& s) {
    std::int64_t total = 0;
    std::int64_t prev = 0;  // value of previous symbol, 0 = none yet
    int run = 0;
    for (char c : s) {
        const std::int64_t v = roman_symbol_value(c);
        if (prev != 0 && v > prev)
            throw std::invalid_argument("from_roman: symbols not in nonincreasing order");
        run = (v == prev) ? run + 1 : 1;
        // Quinary symbols (leading digit 5) appear at most once per run,
        // power-of-ten symbols at most four times.
        std::int64_t lead = v;
        while (lead >= 10) lead /= 10;
        const int max_run = (lead == 5) ? 1 : 4;
        if (run > max_run)
            throw std::invalid_argument("from_roman: symbol repeated too many times");
        total += v;
        prev = v;
    }
    if (total > kRomanMax)
        throw std::invalid_argument("from_roman: value out of range");
    return total;
}

// Longest representable string: to_roman(9,999,999) has 35 symbols.
inline constexpr int kRomanMaxLen = 35;

// Symbol class index for the per-cell 15-way 1-hot: 0 = blank, then the 14
// numerals in increasing value order I=1 .. J=14.
inline constexpr int kRomanClassCount = 15;

inline int roman_class_index(char c) {
    const auto& table = roman_symbols();
    for (std::size_t i = 0; i < table.size(); ++i)
        if (table[i].symbol == c) return static_cast<int>(table.size() - i);
    throw std::invalid_argument(std::string("roman_class_index: invalid symbol '") + c + "'");
}

inline char roman_class_symbol(int idx) {
    if (idx < 0 || idx >= kRomanClassCount)
        throw std::invalid_argument("roman_class_symbol: index out of range");
    if (idx == 0) return ' ';
    const auto& table = roman_symbols();
    return table[table.size() - static_cast<std::size_t>(idx)].symbol;
}

// Right-aligned Roman string padded with leading blanks to `cells` characters.
inline std::string roman_padded(std::int64_t value, int cells) {
    const std::string r = to_roman(value);
    if (static_cast<int>(r.size()) > cells)
        throw std::invalid_argument("roman_padded: value does not fit in cells");
    return std::string(static_cast<std::size_t>(cells) - r.size(), ' ') + r;
}

// Per-cell 15-way 1-hot over {blank} + 14 symbols, right-aligned in `cells`
// cells. Length 15 * cells.
inline std::vector<std::uint8_t> roman_one_hot_encode(std::int64_t value, int cells = kRomanMaxLen) {
    const std::string padded = roman_padded(value, cells);
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(kRomanClassCount) * cells, 0);
    for (int c = 0; c < cells; ++c) {
        const int cls = (padded[c] == ' ') ? 0 : roman_class_index(padded[c]);
        bits[static_cast<std::size_t>(c) * kRomanClassCount + cls] = 1;
    }
    return bits;
}

// Strict inverse of roman_one_hot_encode.
inline std::int64_t roman_one_hot_decode(const std::vector<std::uint8_t>& bits, int cells) {
    if (cells < 1 || bits.size() != static_cast<std::size_t>(kRomanClassCount) * cells)
        throw std::invalid_argument("roman_one_hot_decode: bad vector length");
    std::string s;
    for (int c = 0; c < cells; ++c) {
        int cls = -1;
        for (int k = 0; k < kRomanClassCount; ++k) {
            if (bits[static_cast<std::size_t>(c) * kRomanClassCount + k]) {
                if (cls >= 0)
                    throw std::invalid_argument("roman_one_hot_decode: multiple ones in a cell");
                cls = k;
            }
        }
        if (cls < 0) throw std::invalid_argument("roman_one_hot_decode: empty cell");
        if (cls > 0) s.push_back(roman_class_symbol(cls));
    }
    return from_roman(s);
}

}  // namespace varith
