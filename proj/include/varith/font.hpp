#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "varith/error.hpp"
#include "varith/image.hpp"
#include "varith/numerals.hpp"

namespace varith {

constexpr int kCellWidth = 8;
constexpr int kCellHeight = 15;

// Full symbol set: 10 decimal digits, the 7 classical Roman numerals, and 7
// stand-in letters for the numerals covering 5,000 .. 5,000,000.
inline const std::string& font_alphabet() {
    static const std::string a = "0123456789IVXLCDMABEFGHJ";
    return a;
}

inline const std::string& decimal_alphabet() {
    static const std::string a = "0123456789";
    return a;
}

inline const std::string& roman_alphabet() {
    static const std::string a = "IVXLCDMABEFGHJ";
    return a;
}

// Fixed binary bitmap, 15 rows x 8 cols, row-major.
struct Glyph {
    char symbol = 0;
    std::array<std::uint8_t, kCellHeight * kCellWidth> bitmap{};

    std::uint8_t at(int r, int c) const { return bitmap[static_cast<std::size_t>(r) * kCellWidth + c]; }
    int on_pixels() const {
        int n = 0;
        for (auto b : bitmap) n += b;
        return n;
    }
};

inline int hamming(const Glyph& a, const Glyph& b) {
    int d = 0;
    for (std::size_t i = 0; i < a.bitmap.size(); ++i) d += a.bitmap[i] != b.bitmap[i];
    return d;
}

struct Font {
    std::map<char, Glyph> glyphs;

    bool has(char c) const { return glyphs.count(c) != 0; }
    const Glyph& glyph(char c) const {
        auto it = glyphs.find(c);
        if (it == glyphs.end())
            throw std::invalid_argument(std::string("Font: unknown symbol '") + c + "'");
        return it->second;
    }
};

// Cell geometry: `num_cells` fixed glyph cells of 8x15 pixels in a 15-row
// image, with a blank margin on both sides. Cell m (0-based) occupies
// columns [left_margin + m*8, left_margin + (m+1)*8).
struct Layout {
    int num_cells = 0;
    int left_margin = 2;

    int rows() const { return kCellHeight; }
    int cols() const { return num_cells * kCellWidth + 2 * left_margin; }
    int cell_col(int cell) const { return left_margin + cell * kCellWidth; }
};

inline Layout decimal_layout(int digits) { return Layout{digits, 2}; }

// Roman numbers up to 10^M - 1 need 5*M cells (each decade contributes one
// quinary and up to four unit symbols).
inline Layout roman_layout(int digits) { return Layout{5 * digits, 2}; }

namespace detail {

struct GlyphArt {
    char symbol;
    std::array<const char*, kCellHeight> rows;
};

// The repository font. '#' marks an on pixel. Glyph bodies sit in rows 2-12,
// columns 0-5; column 6-7 and the top/bottom rows stay blank so neighboring
// cells never touch. Any edit must keep every glyph pair at Hamming
// distance >= 4 (checked exhaustively in the font tests).
inline const std::array<GlyphArt, 24>& builtin_glyph_art() {
    static const std::array<GlyphArt, 24> art = {{
        {'0', {"........",
               "........",
               ".####...",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               ".####...",
               "........",
               "........"}},
        {'1', {"........",
               "........",
               "...##...",
               "..###...",
               ".####...",
               "...##...",
               "...##...",
               "...##...",
               "...##...",
               "...##...",
               "...##...",
               "...##...",
               ".#####..",
               "........",
               "........"}},
        {'2', {"........",
               "........",
               ".####...",
               "#....#..",
               ".....#..",
               ".....#..",
               "....#...",
               "...#....",
               "..#.....",
               ".#......",
               "#.......",
               "#.......",
               "######..",
               "........",
               "........"}},
        {'3', {"........",
               "........",
               ".####...",
               "#....#..",
               ".....#..",
               ".....#..",
               "..###...",
               ".....#..",
               ".....#..",
               ".....#..",
               ".....#..",
               "#....#..",
               ".####...",
               "........",
               "........"}},
        {'4', {"........",
               "........",
               "....#...",
               "...##...",
               "..#.#...",
               ".#..#...",
               "#...#...",
               "######..",
               "....#...",
               "....#...",
               "....#...",
               "....#...",
               "....#...",
               "........",
               "........"}},
        {'5', {"........",
               "........",
               "######..",
               "#.......",
               "#.......",
               "#.......",
               "#####...",
               ".....#..",
               ".....#..",
               ".....#..",
               ".....#..",
               "#....#..",
               ".####...",
               "........",
               "........"}},
        {'6', {"........",
               "........",
               ".####...",
               "#....#..",
               "#.......",
               "#.......",
               "#####...",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               ".####...",
               "........",
               "........"}},
        {'7', {"........",
               "........",
               "######..",
               ".....#..",
               ".....#..",
               "....#...",
               "....#...",
               "...#....",
               "...#....",
               "..#.....",
               "..#.....",
               ".#......",
               ".#......",
               "........",
               "........"}},
        {'8', {"........",
               "........",
               ".####...",
               "#....#..",
               "#....#..",
               ".#..#...",
               "..##....",
               ".#..#...",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               ".####...",
               "........",
               "........"}},
        {'9', {"........",
               "........",
               ".####...",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               ".#####..",
               ".....#..",
               ".....#..",
               ".....#..",
               "#....#..",
               ".####...",
               "........",
               "........"}},
        {'I', {"........",
               "........",
               "######..",
               "..##....",
               "..##....",
               "..##....",
               "..##....",
               "..##....",
               "..##....",
               "..##....",
               "..##....",
               "..##....",
               "######..",
               "........",
               "........"}},
        {'V', {"........",
               "........",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               ".#..#...",
               ".#..#...",
               ".#..#...",
               "..##....",
               "..##....",
               "..##....",
               "........",
               "........"}},
        {'X', {"........",
               "........",
               "#....#..",
               "#....#..",
               ".#..#...",
               ".#..#...",
               "..##....",
               "..##....",
               "..##....",
               ".#..#...",
               ".#..#...",
               "#....#..",
               "#....#..",
               "........",
               "........"}},
        {'L', {"........",
               "........",
               "#.......",
               "#.......",
               "#.......",
               "#.......",
               "#.......",
               "#.......",
               "#.......",
               "#.......",
               "#.......",
               "#.......",
               "######..",
               "........",
               "........"}},
        {'C', {"........",
               "........",
               ".####...",
               "#....#..",
               "#.......",
               "#.......",
               "#.......",
               "#.......",
               "#.......",
               "#.......",
               "#.......",
               "#....#..",
               ".####...",
               "........",
               "........"}},
        {'D', {"........",
               "........",
               "####....",
               "#...#...",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#...#...",
               "####....",
               "........",
               "........"}},
        {'M', {"........",
               "........",
               "#....#..",
               "##..##..",
               "#.##.#..",
               "#.##.#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "........",
               "........"}},
        {'A', {"........",
               "........",
               "..##....",
               ".#..#...",
               "#....#..",
               "#....#..",
               "#....#..",
               "######..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "........",
               "........"}},
        {'B', {"........",
               "........",
               "#####...",
               "#....#..",
               "#....#..",
               "#....#..",
               "#####...",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#####...",
               "........",
               "........"}},
        {'E', {"........",
               "........",
               "######..",
               "#.......",
               "#.......",
               "#.......",
               "#####...",
               "#.......",
               "#.......",
               "#.......",
               "#.......",
               "#.......",
               "######..",
               "........",
               "........"}},
        {'F', {"........",
               "........",
               "######..",
               "#.......",
               "#.......",
               "#.......",
               "#####...",
               "#.......",
               "#.......",
               "#.......",
               "#.......",
               "#.......",
               "#.......",
               "........",
               "........"}},
        {'G', {"........",
               "........",
               ".####...",
               "#....#..",
               "#.......",
               "#.......",
               "#.......",
               "#..###..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               ".####...",
               "........",
               "........"}},
        {'H', {"........",
               "........",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "######..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "#....#..",
               "........",
               "........"}},
        {'J', {"........",
               "........",
               "..####..",
               "....#...",
               "....#...",
               "....#...",
               "....#...",
               "....#...",
               "....#...",
               "....#...",
               "#...#...",
               "#...#...",
               ".###....",
               "........",
               "........"}},
    }};
    return art;
}

inline Glyph parse_glyph_art(const GlyphArt& art) {
    Glyph g;
    g.symbol = art.symbol;
    for (int r = 0; r < kCellHeight; ++r) {
        const std::string row = art.rows[r];
        if (row.size() != kCellWidth)
            throw std::logic_error("builtin glyph art row width mismatch");
        for (int c = 0; c < kCellWidth; ++c)
            g.bitmap[static_cast<std::size_t>(r) * kCellWidth + c] = (row[c] == '#') ? 1 : 0;
    }
    return g;
}

}  // namespace detail

inline const Font& builtin_font() {
    static const Font font = [] {
        Font f;
        for (const auto& art : detail::builtin_glyph_art())
            f.glyphs[art.symbol] = detail::parse_glyph_art(art);
        return f;
    }();
    return font;
}

enum class Align { Left, Right };

// Stamps glyphs into consecutive cells; with Align::Right the leading cells
// stay blank. ' ' renders a blank cell.
inline Image render_string(const std::string& s, const Font& font, const Layout& layout,
                           Align align = Align::Right) {
    if (static_cast<int>(s.size()) > layout.num_cells)
        throw std::invalid_argument("render_string: string longer than layout cells");
    Image img = new_image(layout.rows(), layout.cols(), 0.0);
    const int offset = (align == Align::Right) ? layout.num_cells - static_cast<int>(s.size()) : 0;
    for (int i = 0; i < static_cast<int>(s.size()); ++i) {
        if (s[i] == ' ') continue;
        const Glyph& g = font.glyph(s[i]);
        const int col0 = layout.cell_col(offset + i);
        for (int r = 0; r < kCellHeight; ++r)
            for (int c = 0; c < kCellWidth; ++c)
                if (g.at(r, c)) img.at(r, col0 + c) = 1.0;
    }
    return img;
}

inline std::string zero_padded(std::int64_t value, int M) {
    if (value < 0 || value >= pow10(M))
        throw std::invalid_argument("zero_padded: value out of range");
    std::string s(static_cast<std::size_t>(M), '0');
    for (int i = M - 1; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = static_cast<char>('0' + value % 10);
        value /= 10;
    }
    return s;
}

inline Image render_decimal(std::int64_t value, int M, const Font& font, const Layout& layout) {
    if (layout.num_cells != M)
        throw std::invalid_argument("render_decimal: layout must have M cells");
    return render_string(zero_padded(value, M), font, layout, Align::Left);
}

struct DecodeResult {
    std::string symbols;           // ' ' for a blank cell
    std::vector<double> margins;   // per cell: second-best SSD minus best SSD
};

// Per-cell nearest-template matching over `alphabet` plus the all-blank
// template. Cells are scored independently at their fixed positions.
inline DecodeResult decode_image(const Image& img, const Font& font, const Layout& layout,
                                 const std::string& alphabet) {
    if (img.rows != layout.rows() || img.cols != layout.cols())
        throw std::invalid_argument("decode_image: image dimensions do not match layout");
    DecodeResult res;
    res.symbols.reserve(static_cast<std::size_t>(layout.num_cells));
    for (int cell = 0; cell < layout.num_cells; ++cell) {
        const int col0 = layout.cell_col(cell);
        // blank first
        double blank_ssd = 0.0;
        for (int r = 0; r < kCellHeight; ++r)
            for (int c = 0; c < kCellWidth; ++c) {
                const double v = img.at(r, col0 + c);
                blank_ssd += v * v;
            }
        char best_sym = ' ';
        double best = blank_ssd;
        double second = std::numeric_limits<double>::infinity();
        for (char sym : alphabet) {
            const Glyph& g = font.glyph(sym);
            double ssd = 0.0;
            for (int r = 0; r < kCellHeight; ++r)
                for (int c = 0; c < kCellWidth; ++c) {
                    const double d = img.at(r, col0 + c) - g.at(r, c);
                    ssd += d * d;
                }
            if (ssd < best) {
                second = best;
                best = ssd;
                best_sym = sym;
            } else if (ssd < second) {
                second = ssd;
            }
        }
        res.symbols.push_back(best_sym);
        res.margins.push_back(second - best);
    }
    return res;
}

// Fraction of mismatched positions over all string pairs.
inline double digit_error_rate(const std::vector<std::string>& predicted,
                               const std::vector<std::string>& truth) {
    if (predicted.size() != truth.size())
        throw std::invalid_argument("digit_error_rate: list length mismatch");
    std::int64_t total = 0, wrong = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i].size() != truth[i].size())
            throw std::invalid_argument("digit_error_rate: string length mismatch");
        for (std::size_t j = 0; j < predicted[i].size(); ++j) {
            ++total;
            if (predicted[i][j] != truth[i][j]) ++wrong;
        }
    }
    if (total == 0) return 0.0;
    return static_cast<double>(wrong) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Font files: one line per glyph, "<symbol> <30 hex chars>". Bit k of the
// 120-bit bitmap is row-major (k = row*8 + col); hex digit i encodes bits
// 4i..4i+3 with bit 4i in the most significant position.
// ---------------------------------------------------------------------------

inline std::string glyph_to_hex(const Glyph& g) {
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(30);
    for (int i = 0; i < 30; ++i) {
        int nibble = 0;
        for (int j = 0; j < 4; ++j)
            nibble = (nibble << 1) | g.bitmap[static_cast<std::size_t>(4 * i + j)];
        out.push_back(hex[nibble]);
    }
    return out;
}

inline Glyph glyph_from_hex(char symbol, const std::string& hex) {
    if (hex.size() != 30)
        throw FormatError("font file: bitmap must be 30 hex characters");
    Glyph g;
    g.symbol = symbol;
    for (int i = 0; i < 30; ++i) {
        const char c = hex[static_cast<std::size_t>(i)];
        int nibble;
        if (c >= '0' && c <= '9') nibble = c - '0';
        else if (c >= 'a' && c <= 'f') nibble = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') nibble = c - 'A' + 10;
        else throw FormatError("font file: invalid hex character");
        for (int j = 0; j < 4; ++j)
            g.bitmap[static_cast<std::size_t>(4 * i + j)] = (nibble >> (3 - j)) & 1;
    }
    return g;
}

inline void write_font(const Font& font, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("write_font: cannot open " + path);
    for (char sym : font_alphabet())
        f << sym << " " << glyph_to_hex(font.glyph(sym)) << "\n";
    if (!f) throw IoError("write_font: write failed for " + path);
}

// Loads and validates a font: exactly the 24-symbol alphabet, no empty
// glyph, and every glyph pair (and glyph vs blank) at Hamming distance >= 4
// so the template decoder keeps its margin.
inline Font read_font(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("read_font: cannot open " + path);
    Font font;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line.size() < 3 || line[1] != ' ')
            throw FormatError("read_font: malformed line: " + line);
        const char sym = line[0];
        if (font_alphabet().find(sym) == std::string::npos)
            throw FormatError(std::string("read_font: symbol not in alphabet: '") + sym + "'");
        if (font.has(sym))
            throw FormatError(std::string("read_font: duplicate symbol: '") + sym + "'");
        font.glyphs[sym] = glyph_from_hex(sym, line.substr(2));
    }
    if (font.glyphs.size() != font_alphabet().size())
        throw FormatError("read_font: font must define all 24 symbols");
    for (const auto& [sym, g] : font.glyphs)
        if (g.on_pixels() < 4)
            throw FormatError(std::string("read_font: glyph too close to blank: '") + sym + "'");
    for (auto a = font.glyphs.begin(); a != font.glyphs.end(); ++a)
        for (auto b = std::next(a); b != font.glyphs.end(); ++b)
            if (hamming(a->second, b->second) < 4)
                throw FormatError("read_font: glyph pair below minimum Hamming distance 4");
    return font;
}

}  // namespace varith
