#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "varith/font.hpp"
#include "varith/net.hpp"
#include "varith/numerals.hpp"

namespace varith {

// ---------------------------------------------------------------------------
// Hand-constructed visual addition network.
//
// Every binary decision is a threshold gate g(x) = (ReLU(x+delta) -
// ReLU(x)) / delta, which is 0 for x <= -delta, 1 for x >= 0, and linear in
// between. A gate is realized as two ReLU units sharing the same incoming
// weights, the "plus" unit biased delta above the "minus" unit; the consumer
// layer combines the pair with coefficients +-1/delta. The minus unit's
// pre-activation is exactly the gate input, which is what the margin audit
// inspects.
//
// Stages, for M-digit operands (position 0 = least significant digit):
//   detectors   T_k(pos, n): matched filter says digit n sits at cell pos of
//               picture k. 10*M*2 gates.
//   indicators  v(pos, i), i in 0..19: the partial sum
//               S_pos = sum_{j<=pos} (d1_j + d2_j) * 10^j is >= i * 10^pos.
//               20*M gates; v(pos, 20) is identically 0 and never built.
//   outputs     o(pos, n): exactly one per position fires, n = the sum's
//               digit there: v(pos,n) - v(pos,n+1) + v(pos,n+10) -
//               v(pos,n+11) - 1/2 > 0.
//   painter     sigmoid pixels: logit = gain * (2*glyph_n(p) - 1) inside the
//               fired template's cell, -gain on margins.
//
// Integer-valued gate inputs are shifted 1/2 away from every threshold, so
// all margins stay >= 1/2 regardless of M (unnormalized mode).
// ---------------------------------------------------------------------------

struct GateParams {
    double delta = 0.01;
    double gain = 50.0;
    // Scales indicator weights and thresholds by 10^-pos. Margins then
    // shrink by the same factor; the default keeps raw integer weights,
    // which stay exact in doubles up to M = 7 and beyond.
    bool normalize_positions = false;
};

inline double threshold_gate_value(double x, double delta) {
    if (delta <= 0.0) throw std::invalid_argument("threshold_gate_value: delta must be positive");
    const double relu_hi = std::max(x + delta, 0.0);
    const double relu_lo = std::max(x, 0.0);
    return (relu_hi - relu_lo) / delta;
}

// Coefficients that recover a gate value from its ReLU pair.
struct GateCoeffs {
    double plus_scale;    // on ReLU(x + delta)
    double minus_scale;   // on ReLU(x)
    double bias_offset;   // plus unit bias minus minus unit bias
};

inline GateCoeffs threshold_gate_weights(double delta) {
    if (delta <= 0.0) throw std::invalid_argument("threshold_gate_weights: delta must be positive");
    return {1.0 / delta, -1.0 / delta, delta};
}

struct ConstructivePlan {
    int digits = 0;
    Layout layout;

    int detector_gate_count() const { return 20 * digits; }
    int indicator_gate_count() const { return 20 * digits; }
    int output_gate_count() const { return 10 * digits; }

    // Gate index within its layer; ReLU unit rows are (2g, 2g+1).
    int detector_gate(int picture, int position, int digit) const {
        return (picture * digits + position) * 10 + digit;
    }
    int indicator_gate(int position, int threshold) const { return position * 20 + threshold; }
    int output_gate(int position, int digit) const { return position * 10 + digit; }

    // Least-significant digit lives in the rightmost cell.
    int cell_of_position(int position) const { return digits - 1 - position; }
};

struct ConstructiveAdder {
    Network net;
    GateParams params;
    ConstructivePlan plan;
};

namespace detail {

// Matched-filter response of glyph `probe` against the filter of `templ`:
// +1 on template-on pixels, -1 on template-off pixels within the cell.
inline int filter_response(const Glyph& templ, const Glyph& probe) {
    int r = 0;
    for (std::size_t i = 0; i < templ.bitmap.size(); ++i)
        if (probe.bitmap[i]) r += templ.bitmap[i] ? 1 : -1;
    return r;
}

// Threshold midway between the response to the glyph itself and the best
// response of any other digit glyph.
inline double detector_threshold(const Font& font, char symbol) {
    const Glyph& g = font.glyph(symbol);
    const int self = filter_response(g, g);
    int best_other = std::numeric_limits<int>::min();
    for (char other : decimal_alphabet()) {
        if (other == symbol) continue;
        best_other = std::max(best_other, filter_response(g, font.glyph(other)));
    }
    if (best_other >= self)
        throw std::invalid_argument("detector_threshold: font cannot separate digit glyphs");
    return (self + best_other) / 2.0;
}

}  // namespace detail

// HL1: one matched-filter gate per (picture, position, digit). The input is
// the two flattened pictures concatenated.
inline DenseLayer build_detector_layer(const Font& font, const Layout& layout, int M,
                                       double delta) {
    if (M < 1) throw std::invalid_argument("build_detector_layer: M must be positive");
    ConstructivePlan plan{M, layout};
    const int image_size = layout.rows() * layout.cols();
    DenseLayer layer;
    layer.activation = Activation::Relu;
    layer.weights = Eigen::MatrixXd::Zero(2 * plan.detector_gate_count(), 2 * image_size);
    layer.bias.resize(2 * plan.detector_gate_count());
    for (int picture = 0; picture < 2; ++picture) {
        for (int position = 0; position < M; ++position) {
            const int col0 = layout.cell_col(plan.cell_of_position(position));
            for (int digit = 0; digit < 10; ++digit) {
                const char symbol = static_cast<char>('0' + digit);
                const Glyph& g = font.glyph(symbol);
                const int gate = plan.detector_gate(picture, position, digit);
                const double threshold = detail::detector_threshold(font, symbol);
                for (int unit = 2 * gate; unit <= 2 * gate + 1; ++unit) {
                    for (int r = 0; r < kCellHeight; ++r)
                        for (int c = 0; c < kCellWidth; ++c) {
                            const int px = picture * image_size + r * layout.cols() + col0 + c;
                            layer.weights(unit, px) = g.at(r, c) ? 1.0 : -1.0;
                        }
                }
                layer.bias(2 * gate) = -threshold + delta;
                layer.bias(2 * gate + 1) = -threshold;
            }
        }
    }
    return layer;
}

// HL2: v(pos, i) fires when sum_{j<=pos} sum_n n*10^j*(T1(j,n)+T2(j,n))
// >= i*10^pos. Inputs are integer-valued, so a +1/2 bias shift puts every
// gate input at least 1/2 from its threshold.
inline DenseLayer build_indicator_layer(int M, const GateParams& params) {
    if (M < 1) throw std::invalid_argument("build_indicator_layer: M must be positive");
    ConstructivePlan plan{M, Layout{}};
    const GateCoeffs pair = threshold_gate_weights(params.delta);
    DenseLayer layer;
    layer.activation = Activation::Relu;
    layer.weights = Eigen::MatrixXd::Zero(2 * plan.indicator_gate_count(),
                                          2 * plan.detector_gate_count());
    layer.bias.resize(2 * plan.indicator_gate_count());
    for (int position = 0; position < M; ++position) {
        const double scale = params.normalize_positions
                                 ? 1.0 / static_cast<double>(pow10(position))
                                 : 1.0;
        for (int i = 0; i < 20; ++i) {
            const int gate = plan.indicator_gate(position, i);
            for (int unit = 2 * gate; unit <= 2 * gate + 1; ++unit) {
                for (int picture = 0; picture < 2; ++picture)
                    for (int j = 0; j <= position; ++j)
                        for (int digit = 1; digit < 10; ++digit) {
                            const double coef =
                                scale * static_cast<double>(digit) *
                                static_cast<double>(pow10(j));
                            const int src = plan.detector_gate(picture, j, digit);
                            layer.weights(unit, 2 * src) = coef * pair.plus_scale;
                            layer.weights(unit, 2 * src + 1) = coef * pair.minus_scale;
                        }
            }
            const double bias =
                scale * (0.5 - static_cast<double>(i) * static_cast<double>(pow10(position)));
            layer.bias(2 * gate) = bias + params.delta;
            layer.bias(2 * gate + 1) = bias;
        }
    }
    return layer;
}

// HL3: o(pos, n) = gate(v(pos,n) - v(pos,n+1) + v(pos,n+10) - v(pos,n+11)
// - 1/2), with v(pos, 20) identically zero (term dropped for n = 9).
inline DenseLayer build_output_layer(int M, const GateParams& params) {
    if (M < 1) throw std::invalid_argument("build_output_layer: M must be positive");
    ConstructivePlan plan{M, Layout{}};
    const GateCoeffs pair = threshold_gate_weights(params.delta);
    DenseLayer layer;
    layer.activation = Activation::Relu;
    layer.weights = Eigen::MatrixXd::Zero(2 * plan.output_gate_count(),
                                          2 * plan.indicator_gate_count());
    layer.bias.resize(2 * plan.output_gate_count());
    for (int position = 0; position < M; ++position) {
        for (int digit = 0; digit < 10; ++digit) {
            const int gate = plan.output_gate(position, digit);
            for (int unit = 2 * gate; unit <= 2 * gate + 1; ++unit) {
                auto add_term = [&](int threshold, double sign) {
                    if (threshold >= 20) return;  // v(pos, 20) == 0
                    const int src = plan.indicator_gate(position, threshold);
                    layer.weights(unit, 2 * src) += sign * pair.plus_scale;
                    layer.weights(unit, 2 * src + 1) += sign * pair.minus_scale;
                };
                add_term(digit, 1.0);
                add_term(digit + 1, -1.0);
                add_term(digit + 10, 1.0);
                add_term(digit + 11, -1.0);
            }
            layer.bias(2 * gate) = -0.5 + params.delta;
            layer.bias(2 * gate + 1) = -0.5;
        }
    }
    return layer;
}

// Output layer: each fired template paints its glyph, logit +-gain inside
// the cell, -gain on the margins.
inline DenseLayer build_painter(const Font& font, const Layout& layout, int M,
                                const GateParams& params) {
    if (M < 1) throw std::invalid_argument("build_painter: M must be positive");
    ConstructivePlan plan{M, layout};
    const GateCoeffs pair = threshold_gate_weights(params.delta);
    const int image_size = layout.rows() * layout.cols();
    DenseLayer layer;
    layer.activation = Activation::Sigmoid;
    layer.weights = Eigen::MatrixXd::Zero(image_size, 2 * plan.output_gate_count());
    layer.bias = Eigen::VectorXd::Constant(image_size, -params.gain);
    for (int position = 0; position < M; ++position) {
        const int col0 = layout.cell_col(plan.cell_of_position(position));
        for (int digit = 0; digit < 10; ++digit) {
            const int gate = plan.output_gate(position, digit);
            const Glyph& g = font.glyph(static_cast<char>('0' + digit));
            for (int r = 0; r < kCellHeight; ++r)
                for (int c = 0; c < kCellWidth; ++c) {
                    if (!g.at(r, c)) continue;
                    const int px = r * layout.cols() + col0 + c;
                    layer.weights(px, 2 * gate) = 2.0 * params.gain * pair.plus_scale;
                    layer.weights(px, 2 * gate + 1) = 2.0 * params.gain * pair.minus_scale;
                }
        }
    }
    return layer;
}

inline ConstructiveAdder build_full_adder(const Font& font, int M, GateParams params = {}) {
    ConstructiveAdder adder;
    adder.params = params;
    adder.plan = ConstructivePlan{M, decimal_layout(M)};
    adder.net.layers.push_back(build_detector_layer(font, adder.plan.layout, M, params.delta));
    adder.net.layers.push_back(build_indicator_layer(M, params));
    adder.net.layers.push_back(build_output_layer(M, params));
    adder.net.layers.push_back(build_painter(font, adder.plan.layout, M, params));
    return adder;
}

// Recovers logical gate values from a gate layer's ReLU activations.
inline Eigen::MatrixXd gate_values(const Eigen::MatrixXd& relu_post, double delta) {
    const Eigen::Index gates = relu_post.rows() / 2;
    Eigen::MatrixXd v(gates, relu_post.cols());
    for (Eigen::Index g = 0; g < gates; ++g)
        v.row(g) = (relu_post.row(2 * g) - relu_post.row(2 * g + 1)) / delta;
    return v;
}

// Distance of a gate input from the undecided ramp (-delta, 0); negative
// when the input lands inside the ramp.
inline double gate_margin(double x, double delta) { return std::max(x, -x - delta); }

struct VerifyReport {
    int digits = 0;
    long long pairs = 0;
    long long digit_errors = 0;
    long long pair_errors = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    double delta = 0.0;
    double gain = 0.0;
};

inline std::string verify_report_text(const VerifyReport& r) {
    std::ostringstream os;
    os << "digits: " << r.digits << "\n";
    os << "pairs: " << r.pairs << "\n";
    os << "errors: " << r.digit_errors << "\n";
    os << "error_pairs: " << r.pair_errors << "\n";
    os << "min_margin: " << r.min_margin << "\n";
    os << "delta: " << r.delta << "\n";
    os << "gain: " << r.gain << "\n";
    return os.str();
}

// Brute-force check of the constructed adder over every operand pair with
// a, b in [0, 5*10^(M-1) - 1]: render, forward, decode, compare against
// integer addition. Also audits how close any gate input ever gets to its
// threshold.
inline VerifyReport verify_constructive(const ConstructiveAdder& adder, const Font& font) {
    const int M = adder.plan.digits;
    const Layout& layout = adder.plan.layout;
    const std::int64_t hi = 5 * pow10(M - 1) - 1;
    const int image_size = layout.rows() * layout.cols();

    // Render each operand image once.
    std::vector<Eigen::VectorXd> rendered(static_cast<std::size_t>(hi) + 1);
    for (std::int64_t v = 0; v <= hi; ++v) {
        const Image img = render_decimal(v, M, font, layout);
        rendered[static_cast<std::size_t>(v)] =
            Eigen::Map<const Eigen::VectorXd>(img.pixels.data(), image_size);
    }

    VerifyReport report;
    report.digits = M;
    report.delta = adder.params.delta;
    report.gain = adder.params.gain;

    const int batch = 512;
    Eigen::MatrixXd x(2 * image_size, batch);
    std::vector<std::pair<std::int64_t, std::int64_t>> chunk;
    chunk.reserve(batch);
    ForwardCache cache;
    Image out_img = new_image(layout.rows(), layout.cols(), 0.0);

    auto flush = [&](int used) {
        const Eigen::MatrixXd out = forward(adder.net, x.leftCols(used), &cache);
        // Margin audit over the three gate layers.
        for (int l = 0; l < 3; ++l) {
            const Eigen::MatrixXd& pre = cache.pre[static_cast<std::size_t>(l)];
            for (Eigen::Index g = 0; g < pre.rows() / 2; ++g)
                for (Eigen::Index col = 0; col < pre.cols(); ++col)
                    report.min_margin = std::min(
                        report.min_margin, gate_margin(pre(2 * g + 1, col), adder.params.delta));
        }
        for (int col = 0; col < used; ++col) {
            const auto [a, b] = chunk[static_cast<std::size_t>(col)];
            for (int i = 0; i < image_size; ++i)
                out_img.pixels[static_cast<std::size_t>(i)] = out(i, col);
            const DecodeResult dec = decode_image(out_img, font, layout, decimal_alphabet());
            const std::string expect = zero_padded(a + b, M);
            int wrong = 0;
            for (int i = 0; i < M; ++i)
                if (dec.symbols[static_cast<std::size_t>(i)] != expect[static_cast<std::size_t>(i)])
                    ++wrong;
            report.digit_errors += wrong;
            report.pair_errors += wrong > 0;
            ++report.pairs;
        }
        chunk.clear();
    };

    for (std::int64_t a = 0; a <= hi; ++a) {
        for (std::int64_t b = 0; b <= hi; ++b) {
            const int col = static_cast<int>(chunk.size());
            x.col(col).head(image_size) = rendered[static_cast<std::size_t>(a)];
            x.col(col).tail(image_size) = rendered[static_cast<std::size_t>(b)];
            chunk.emplace_back(a, b);
            if (static_cast<int>(chunk.size()) == batch) flush(batch);
        }
    }
    if (!chunk.empty()) flush(static_cast<int>(chunk.size()));
    return report;
}

inline VerifyReport verify_constructive(int M, GateParams params, const Font& font) {
    return verify_constructive(build_full_adder(font, M, params), font);
}

}  // namespace varith
