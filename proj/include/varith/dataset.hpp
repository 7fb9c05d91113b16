#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "varith/error.hpp"
#include "varith/font.hpp"
#include "varith/image.hpp"
#include "varith/numerals.hpp"
#include "varith/rng.hpp"

namespace varith {

enum class OpKind { Add, Sub, Mul, RomanAdd };
enum class SampleMode { Visual, OneHot };

inline std::string op_name(OpKind op) {
    switch (op) {
        case OpKind::Add: return "ADD";
        case OpKind::Sub: return "SUB";
        case OpKind::Mul: return "MUL";
        case OpKind::RomanAdd: return "ROMAN_ADD";
    }
    throw std::invalid_argument("op_name: bad op");
}

inline OpKind op_from_name(const std::string& s) {
    if (s == "ADD") return OpKind::Add;
    if (s == "SUB") return OpKind::Sub;
    if (s == "MUL") return OpKind::Mul;
    if (s == "ROMAN_ADD") return OpKind::RomanAdd;
    throw std::invalid_argument("op_from_name: unknown op " + s);
}

inline std::string mode_name(SampleMode m) {
    return m == SampleMode::Visual ? "visual" : "one_hot";
}

inline SampleMode mode_from_name(const std::string& s) {
    if (s == "visual") return SampleMode::Visual;
    if (s == "one_hot") return SampleMode::OneHot;
    throw std::invalid_argument("mode_from_name: unknown mode " + s);
}

inline std::int64_t apply_op(OpKind op, std::int64_t a, std::int64_t b) {
    switch (op) {
        case OpKind::Add: return a + b;
        case OpKind::Sub: return a - b;
        case OpKind::Mul: return a * b;
        case OpKind::RomanAdd: return a + b;
    }
    throw std::invalid_argument("apply_op: bad op");
}

// Largest operand per op so the result always fits the output representation
// (M decimal digits, or 5*M Roman cells).
//   ADD / ROMAN_ADD: [0, 5*10^(M-1) - 1]  (sum < 10^M)
//   SUB:             [0, 10^M - 1] with a >= b
//   MUL:             [0, floor(sqrt(10^M - 1))], except M=7 keeps the
//                    published bound 3160 (3162 would also fit).
inline std::int64_t operand_max(OpKind op, int M) {
    if (M < 1) throw std::invalid_argument("operand_max: M must be positive");
    switch (op) {
        case OpKind::Add:
        case OpKind::RomanAdd:
            return 5 * pow10(M - 1) - 1;
        case OpKind::Sub:
            return pow10(M) - 1;
        case OpKind::Mul: {
            if (M == 7) return 3160;
            std::int64_t r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(pow10(M) - 1)));
            while ((r + 1) * (r + 1) <= pow10(M) - 1) ++r;
            while (r * r > pow10(M) - 1) --r;
            return r;
        }
    }
    throw std::invalid_argument("operand_max: bad op");
}

// Uniform operand pair for the op. SUB draws uniformly over the triangle
// {(a, b) : 0 <= b <= a <= 10^M - 1} by inverting the triangular index.
inline std::pair<std::int64_t, std::int64_t> sample_operands(OpKind op, int M, Rng& rng) {
    const std::int64_t hi = operand_max(op, M);
    if (op == OpKind::Sub) {
        const std::int64_t n = hi + 1;
        const std::uint64_t total = static_cast<std::uint64_t>(n) * (n + 1) / 2;
        const std::uint64_t k = rng.below(total);
        std::int64_t a = static_cast<std::int64_t>((std::sqrt(8.0 * static_cast<double>(k) + 1.0) - 1.0) / 2.0);
        while (static_cast<std::uint64_t>(a) * (a + 1) / 2 > k) --a;
        while (static_cast<std::uint64_t>(a + 1) * (a + 2) / 2 <= k) ++a;
        const std::int64_t b = static_cast<std::int64_t>(k - static_cast<std::uint64_t>(a) * (a + 1) / 2);
        return {a, b};
    }
    const std::int64_t a = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi) + 1));
    const std::int64_t b = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi) + 1));
    return {a, b};
}

// One training example. Vectors hold flattened images (visual) or 1-hot
// encodings; values are stored in 32-bit float precision so the in-memory
// dataset matches its on-disk form exactly.
struct Sample {
    std::vector<float> input1, input2, target;
    std::int64_t a = 0, b = 0, result = 0;

    bool operator==(const Sample& o) const {
        return input1 == o.input1 && input2 == o.input2 && target == o.target &&
               a == o.a && b == o.b && result == o.result;
    }
};

struct DatasetSpec {
    OpKind op = OpKind::Add;
    SampleMode mode = SampleMode::Visual;
    int digits = 7;
    std::int64_t train_n = 150000;
    std::int64_t test_n = 30000;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

struct Dataset {
    OpKind op = OpKind::Add;
    SampleMode mode = SampleMode::Visual;
    int digits = 0;
    int rows = 0, cols = 0;  // per image, visual mode
    int vec_len = 0;         // per number, one-hot mode
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    std::vector<Sample> samples;

    int number_dim() const { return mode == SampleMode::Visual ? rows * cols : vec_len; }
    int input_dim() const { return 2 * number_dim(); }
    int target_dim() const { return number_dim(); }

    bool operator==(const Dataset& o) const {
        return op == o.op && mode == o.mode && digits == o.digits && rows == o.rows &&
               cols == o.cols && vec_len == o.vec_len && noise_sigma == o.noise_sigma &&
               seed == o.seed && samples == o.samples;
    }
};

inline Layout dataset_layout(OpKind op, int digits) {
    return op == OpKind::RomanAdd ? roman_layout(digits) : decimal_layout(digits);
}

namespace detail {

inline std::vector<float> to_f32(const std::vector<double>& v) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return out;
}

inline std::vector<float> to_f32(const std::vector<std::uint8_t>& v) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return out;
}

// Renders the number as the op's experiment draws it: zero-padded decimal,
// or right-aligned Roman.
inline Image render_number(OpKind op, std::int64_t value, const Font& font, const Layout& layout) {
    if (op == OpKind::RomanAdd)
        return render_string(to_roman(value), font, layout, Align::Right);
    return render_decimal(value, layout.num_cells, font, layout);
}

inline std::vector<std::uint8_t> encode_number(OpKind op, std::int64_t value, int digits) {
    if (op == OpKind::RomanAdd) return roman_one_hot_encode(value, 5 * digits);
    return one_hot_encode(value, digits);
}

}  // namespace detail

// Truth string for a number as it appears in the output picture.
inline std::string truth_string(OpKind op, std::int64_t value, int digits) {
    if (op == OpKind::RomanAdd) return roman_padded(value, 5 * digits);
    return zero_padded(value, digits);
}

inline Sample make_sample(OpKind op, std::int64_t a, std::int64_t b, SampleMode mode, int digits,
                          double noise_sigma, Rng& rng, const Font& font) {
    const std::int64_t hi = operand_max(op, digits);
    if (a < 0 || b < 0 || a > hi || b > hi || (op == OpKind::Sub && a < b))
        throw std::invalid_argument("make_sample: operands out of range for op");
    Sample s;
    s.a = a;
    s.b = b;
    s.result = apply_op(op, a, b);
    if (mode == SampleMode::OneHot) {
        if (noise_sigma > 0.0)
            throw std::invalid_argument("make_sample: noise is only defined for visual mode");
        s.input1 = detail::to_f32(detail::encode_number(op, a, digits));
        s.input2 = detail::to_f32(detail::encode_number(op, b, digits));
        s.target = detail::to_f32(detail::encode_number(op, s.result, digits));
        return s;
    }
    const Layout layout = dataset_layout(op, digits);
    Image f1 = detail::render_number(op, a, font, layout);
    Image f2 = detail::render_number(op, b, font, layout);
    Image e = detail::render_number(op, s.result, font, layout);
    if (noise_sigma > 0.0) {
        f1 = add_gaussian_noise(f1, noise_sigma, rng);
        f2 = add_gaussian_noise(f2, noise_sigma, rng);
        e = add_gaussian_noise(e, noise_sigma, rng);
    }
    s.input1 = detail::to_f32(f1.pixels);
    s.input2 = detail::to_f32(f2.pixels);
    s.target = detail::to_f32(e.pixels);
    return s;
}

// Number of distinct operand pairs for the op, capped to avoid overflow.
inline double operand_pair_count(OpKind op, int M) {
    const double n = static_cast<double>(operand_max(op, M)) + 1.0;
    return op == OpKind::Sub ? n * (n + 1.0) / 2.0 : n * n;
}

// Draws train + test operand pairs without replacement (disjoint (a, b)
// tuples), then materializes samples. Sample i's noise comes from an
// independent generator seeded by (seed, i), so materialization order does
// not affect the result.
inline std::pair<Dataset, Dataset> generate_dataset(const DatasetSpec& spec, const Font& font) {
    if (spec.train_n < 0 || spec.test_n < 0)
        throw std::invalid_argument("generate_dataset: negative sample count");
    if (spec.digits < 1)
        throw std::invalid_argument("generate_dataset: digits must be positive");
    if (static_cast<double>(spec.train_n) + static_cast<double>(spec.test_n) >
        0.9 * operand_pair_count(spec.op, spec.digits))
        throw std::invalid_argument(
            "generate_dataset: requested more than 90% of the operand pair space");

    // Pair selection is a single sequential stream with rejection of repeats.
    Rng pair_rng(mix_seed(spec.seed, 0));
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(static_cast<std::size_t>(spec.train_n + spec.test_n) * 2);
    std::vector<std::pair<std::int64_t, std::int64_t>> pairs;
    pairs.reserve(static_cast<std::size_t>(spec.train_n + spec.test_n));
    while (pairs.size() < static_cast<std::size_t>(spec.train_n + spec.test_n)) {
        const auto [a, b] = sample_operands(spec.op, spec.digits, pair_rng);
        const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
        if (!seen.insert(key).second) continue;
        pairs.emplace_back(a, b);
    }

    auto init = [&spec](Dataset& ds) {
        ds.op = spec.op;
        ds.mode = spec.mode;
        ds.digits = spec.digits;
        ds.noise_sigma = spec.noise_sigma;
        ds.seed = spec.seed;
        if (spec.mode == SampleMode::Visual) {
            const Layout layout = dataset_layout(spec.op, spec.digits);
            ds.rows = layout.rows();
            ds.cols = layout.cols();
        } else {
            ds.vec_len = spec.op == OpKind::RomanAdd
                             ? kRomanClassCount * 5 * spec.digits
                             : 10 * spec.digits;
        }
    };
    Dataset train, test;
    init(train);
    init(test);
    train.samples.reserve(static_cast<std::size_t>(spec.train_n));
    test.samples.reserve(static_cast<std::size_t>(spec.test_n));
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        Rng sample_rng(mix_seed(spec.seed, i + 1));
        Sample s = make_sample(spec.op, pairs[i].first, pairs[i].second, spec.mode, spec.digits,
                               spec.noise_sigma, sample_rng, font);
        if (i < static_cast<std::size_t>(spec.train_n))
            train.samples.push_back(std::move(s));
        else
            test.samples.push_back(std::move(s));
    }
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Dataset files. ASCII header:
//   VARITH1
//   op=ADD
//   mode=visual
//   digits=7
//   count=N
//   rows=15        cols=60      (visual)   |   veclen=70   (one_hot)
//   sigma=<%.17g>
//   seed=<u64>
//   meta=<a> <b> <result>       (N lines; evaluation ground truth)
//   end
// followed by count * (2*input + target) little-endian 32-bit floats.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_f32_le(std::ostream& os, const std::vector<float>& v) {
    for (float x : v) {
        std::uint32_t u;
        std::memcpy(&u, &x, 4);
        const unsigned char bytes[4] = {
            static_cast<unsigned char>(u & 0xFF),
            static_cast<unsigned char>((u >> 8) & 0xFF),
            static_cast<unsigned char>((u >> 16) & 0xFF),
            static_cast<unsigned char>((u >> 24) & 0xFF),
        };
        os.write(reinterpret_cast<const char*>(bytes), 4);
    }
}

inline void read_f32_le(std::istream& is, std::vector<float>& v, std::size_t n, const std::string& path) {
    v.resize(n);
    std::vector<unsigned char> buf(n * 4);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (is.gcount() != static_cast<std::streamsize>(buf.size()))
        throw FormatError("read_dataset: truncated payload: " + path);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t u = static_cast<std::uint32_t>(buf[4 * i]) |
                                (static_cast<std::uint32_t>(buf[4 * i + 1]) << 8) |
                                (static_cast<std::uint32_t>(buf[4 * i + 2]) << 16) |
                                (static_cast<std::uint32_t>(buf[4 * i + 3]) << 24);
        std::memcpy(&v[i], &u, 4);
    }
}

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string expect_line(std::istream& is, const std::string& key, const std::string& path) {
    std::string line;
    if (!std::getline(is, line))
        throw FormatError("read_dataset: missing header line '" + key + "': " + path);
    if (line.rfind(key + "=", 0) != 0)
        throw FormatError("read_dataset: expected '" + key + "=': " + path);
    return line.substr(key.size() + 1);
}

}  // namespace detail

inline void write_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("write_dataset: cannot open " + path);
    f << "VARITH1\n";
    f << "op=" << op_name(ds.op) << "\n";
    f << "mode=" << mode_name(ds.mode) << "\n";
    f << "digits=" << ds.digits << "\n";
    f << "count=" << ds.samples.size() << "\n";
    if (ds.mode == SampleMode::Visual)
        f << "rows=" << ds.rows << "\ncols=" << ds.cols << "\n";
    else
        f << "veclen=" << ds.vec_len << "\n";
    f << "sigma=" << detail::fmt_double(ds.noise_sigma) << "\n";
    f << "seed=" << ds.seed << "\n";
    for (const Sample& s : ds.samples)
        f << "meta=" << s.a << " " << s.b << " " << s.result << "\n";
    f << "end\n";
    for (const Sample& s : ds.samples) {
        detail::write_f32_le(f, s.input1);
        detail::write_f32_le(f, s.input2);
        detail::write_f32_le(f, s.target);
    }
    if (!f) throw IoError("write_dataset: write failed for " + path);
}

inline Dataset read_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("read_dataset: cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw FormatError("read_dataset: empty file: " + path);
    if (line != "VARITH1") throw FormatError("read_dataset: unsupported format magic: " + path);
    Dataset ds;
    ds.op = op_from_name(detail::expect_line(f, "op", path));
    ds.mode = mode_from_name(detail::expect_line(f, "mode", path));
    ds.digits = std::stoi(detail::expect_line(f, "digits", path));
    const std::int64_t count = std::stoll(detail::expect_line(f, "count", path));
    if (count < 0) throw FormatError("read_dataset: negative count: " + path);
    if (ds.mode == SampleMode::Visual) {
        ds.rows = std::stoi(detail::expect_line(f, "rows", path));
        ds.cols = std::stoi(detail::expect_line(f, "cols", path));
    } else {
        ds.vec_len = std::stoi(detail::expect_line(f, "veclen", path));
    }
    ds.noise_sigma = std::stod(detail::expect_line(f, "sigma", path));
    ds.seed = std::stoull(detail::expect_line(f, "seed", path));
    ds.samples.resize(static_cast<std::size_t>(count));
    for (Sample& s : ds.samples) {
        const std::string meta = detail::expect_line(f, "meta", path);
        long long a = 0, b = 0, r = 0;
        if (std::sscanf(meta.c_str(), "%lld %lld %lld", &a, &b, &r) != 3)
            throw FormatError("read_dataset: malformed meta line: " + path);
        s.a = a;
        s.b = b;
        s.result = r;
    }
    if (!std::getline(f, line) || line != "end")
        throw FormatError("read_dataset: missing end-of-header: " + path);
    const std::size_t n = static_cast<std::size_t>(ds.number_dim());
    for (Sample& s : ds.samples) {
        detail::read_f32_le(f, s.input1, n, path);
        detail::read_f32_le(f, s.input2, n, path);
        detail::read_f32_le(f, s.target, n, path);
    }
    return ds;
}

}  // namespace varith
