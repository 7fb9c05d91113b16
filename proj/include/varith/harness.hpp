#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "varith/constructive.hpp"
#include "varith/dataset.hpp"
#include "varith/font.hpp"
#include "varith/net.hpp"

namespace varith {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct MetricsReport {
    std::int64_t samples = 0;
    double digit_error = 0.0;                 // fraction of wrong output positions
    std::vector<double> per_position_error;   // cells left to right
    double mse_prediction_clean = 0.0;        // prediction vs clean target
    double mse_target_clean = 0.0;            // stored (noisy) target vs clean target
    double mean_decode_margin = 0.0;          // visual mode only
    std::string config_echo;
    double wall_time_sec = 0.0;  // never serialized; reports stay bit-reproducible
};

inline std::string serialize_report(const MetricsReport& r) {
    std::ostringstream os;
    os << "samples: " << r.samples << "\n";
    os << "digit_error: " << detail::fmt_double(r.digit_error) << "\n";
    os << "per_position_error:";
    for (double e : r.per_position_error) os << " " << detail::fmt_double(e);
    os << "\n";
    os << "mse_prediction_clean: " << detail::fmt_double(r.mse_prediction_clean) << "\n";
    os << "mse_target_clean: " << detail::fmt_double(r.mse_target_clean) << "\n";
    os << "mean_decode_margin: " << detail::fmt_double(r.mean_decode_margin) << "\n";
    os << "config: " << r.config_echo << "\n";
    return os.str();
}

inline MetricsReport parse_report(const std::string& text) {
    MetricsReport r;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const std::size_t sep = line.find(": ");
        if (sep == std::string::npos) {
            if (line.rfind("per_position_error:", 0) == 0) continue;  // empty vector
            throw FormatError("parse_report: malformed line: " + line);
        }
        const std::string key = line.substr(0, sep);
        const std::string val = line.substr(sep + 2);
        if (key == "samples") r.samples = std::stoll(val);
        else if (key == "digit_error") r.digit_error = std::stod(val);
        else if (key == "per_position_error") {
            std::istringstream vs(val);
            double x;
            while (vs >> x) r.per_position_error.push_back(x);
        } else if (key == "mse_prediction_clean") r.mse_prediction_clean = std::stod(val);
        else if (key == "mse_target_clean") r.mse_target_clean = std::stod(val);
        else if (key == "mean_decode_margin") r.mean_decode_margin = std::stod(val);
        else if (key == "config") r.config_echo = val;
        else throw FormatError("parse_report: unknown key: " + key);
    }
    return r;
}

namespace detail {

inline Image vector_as_image(const Eigen::MatrixXd& m, Eigen::Index col, int rows, int cols) {
    Image img = new_image(rows, cols, 0.0);
    for (int i = 0; i < rows * cols; ++i)
        img.pixels[static_cast<std::size_t>(i)] = std::clamp(m(i, col), 0.0, 1.0);
    return img;
}

inline Image stored_target_image(const Sample& s, int rows, int cols) {
    Image img = new_image(rows, cols, 0.0);
    for (int i = 0; i < rows * cols; ++i)
        img.pixels[static_cast<std::size_t>(i)] = s.target[static_cast<std::size_t>(i)];
    return img;
}

inline int argmax_block(const Eigen::VectorXd& v, int offset, int len) {
    int best = 0;
    for (int i = 1; i < len; ++i)
        if (v(offset + i) > v(offset + best)) best = i;
    return best;
}

}  // namespace detail

// Scores predictions against the exact arithmetic result carried in each
// sample's meta, never against the (possibly noisy) stored target. Visual
// predictions are template-decoded; 1-hot predictions use per-block argmax.
inline MetricsReport evaluate(const Network& net, const Dataset& test, const Font& font) {
    if (test.samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
    if (net.input_dim() != test.input_dim() || net.output_dim() != test.target_dim())
        throw std::invalid_argument("evaluate: network does not match dataset dims");
    const auto t0 = std::chrono::steady_clock::now();

    const bool visual = test.mode == SampleMode::Visual;
    const bool roman = test.op == OpKind::RomanAdd;
    const Layout layout = dataset_layout(test.op, test.digits);
    const int positions = visual ? layout.num_cells
                                 : (roman ? 5 * test.digits : test.digits);

    MetricsReport rep;
    rep.samples = static_cast<std::int64_t>(test.samples.size());
    rep.per_position_error.assign(static_cast<std::size_t>(positions), 0.0);

    std::int64_t wrong_total = 0;
    std::vector<std::int64_t> wrong_at(static_cast<std::size_t>(positions), 0);
    double mse_pred_sum = 0.0, mse_tgt_sum = 0.0, margin_sum = 0.0;

    const int chunk = 256;
    Eigen::MatrixXd x;
    std::vector<std::int64_t> order(test.samples.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t from = 0; from < test.samples.size(); from += chunk) {
        const std::size_t to = std::min(test.samples.size(), from + chunk);
        Eigen::MatrixXd y;
        detail::gather_batch(test, order, from, to, x, y);
        const Eigen::MatrixXd out = forward(net, x);
        for (std::size_t idx = from; idx < to; ++idx) {
            const Sample& s = test.samples[idx];
            const Eigen::Index col = static_cast<Eigen::Index>(idx - from);
            if (visual) {
                const Image pred = detail::vector_as_image(out, col, test.rows, test.cols);
                const DecodeResult dec = decode_image(
                    pred, font, layout, roman ? roman_alphabet() : decimal_alphabet());
                const std::string truth = truth_string(test.op, s.result, test.digits);
                for (int p = 0; p < positions; ++p)
                    if (dec.symbols[static_cast<std::size_t>(p)] != truth[static_cast<std::size_t>(p)]) {
                        ++wrong_total;
                        ++wrong_at[static_cast<std::size_t>(p)];
                    }
                for (double m : dec.margins) margin_sum += m;
                const Image clean = detail::render_number(test.op, s.result, font, layout);
                mse_pred_sum += mse(pred, clean);
                if (test.noise_sigma > 0.0)
                    mse_tgt_sum += mse(detail::stored_target_image(s, test.rows, test.cols), clean);
            } else {
                const int block = roman ? kRomanClassCount : 10;
                std::vector<int> truth_cls(static_cast<std::size_t>(positions));
                if (roman) {
                    const std::string padded = roman_padded(s.result, positions);
                    for (int p = 0; p < positions; ++p)
                        truth_cls[static_cast<std::size_t>(p)] =
                            padded[static_cast<std::size_t>(p)] == ' '
                                ? 0
                                : roman_class_index(padded[static_cast<std::size_t>(p)]);
                } else {
                    const std::vector<int> d = digits_of(s.result, test.digits);
                    for (int p = 0; p < positions; ++p) truth_cls[static_cast<std::size_t>(p)] = d[static_cast<std::size_t>(p)];
                }
                const Eigen::VectorXd pred = out.col(col);
                for (int p = 0; p < positions; ++p) {
                    const int got = detail::argmax_block(pred, p * block, block);
                    if (got != truth_cls[static_cast<std::size_t>(p)]) {
                        ++wrong_total;
                        ++wrong_at[static_cast<std::size_t>(p)];
                    }
                }
                double acc = 0.0;
                for (int i = 0; i < test.target_dim(); ++i) {
                    const double d = pred(i) - s.target[static_cast<std::size_t>(i)];
                    acc += d * d;
                }
                mse_pred_sum += acc / test.target_dim();
            }
        }
    }

    const double n = static_cast<double>(test.samples.size());
    rep.digit_error = static_cast<double>(wrong_total) / (n * positions);
    for (int p = 0; p < positions; ++p)
        rep.per_position_error[static_cast<std::size_t>(p)] =
            static_cast<double>(wrong_at[static_cast<std::size_t>(p)]) / n;
    rep.mse_prediction_clean = mse_pred_sum / n;
    rep.mse_target_clean = test.noise_sigma > 0.0 ? mse_tgt_sum / n : 0.0;
    rep.mean_decode_margin = visual ? margin_sum / (n * positions) : 0.0;
    std::ostringstream echo;
    echo << "op=" << op_name(test.op) << " mode=" << mode_name(test.mode)
         << " digits=" << test.digits << " sigma=" << detail::fmt_double(test.noise_sigma)
         << " test_n=" << test.samples.size();
    rep.config_echo = echo.str();
    rep.wall_time_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// ---------------------------------------------------------------------------
// Example dumps (the paper's figure panels, as PGM files)
// ---------------------------------------------------------------------------

inline void render_examples(const Network& net, const Dataset& ds, int count,
                            const std::string& outdir, const Font& font) {
    if (ds.mode != SampleMode::Visual)
        throw std::invalid_argument("render_examples: dataset must be visual");
    std::filesystem::create_directories(outdir);
    const Layout layout = dataset_layout(ds.op, ds.digits);
    count = std::min<int>(count, static_cast<int>(ds.samples.size()));
    for (int k = 0; k < count; ++k) {
        const Sample& s = ds.samples[static_cast<std::size_t>(k)];
        char stem[32];
        std::snprintf(stem, sizeof stem, "sample%03d", k);
        const std::string base = outdir + "/" + stem;
        Image in1 = new_image(ds.rows, ds.cols, 0.0), in2 = in1;
        for (int i = 0; i < ds.rows * ds.cols; ++i) {
            in1.pixels[static_cast<std::size_t>(i)] = s.input1[static_cast<std::size_t>(i)];
            in2.pixels[static_cast<std::size_t>(i)] = s.input2[static_cast<std::size_t>(i)];
        }
        write_pgm(in1, base + "_input1.pgm");
        write_pgm(in2, base + "_input2.pgm");
        write_pgm(predict_image(net, s, ds.rows, ds.cols), base + "_prediction.pgm");
        write_pgm(detail::render_number(ds.op, s.result, font, layout), base + "_truth.pgm");
        if (ds.noise_sigma > 0.0)
            write_pgm(detail::stored_target_image(s, ds.rows, ds.cols), base + "_target_noisy.pgm");
    }
}

// First-layer filters as images (one per unit, both input pictures side by
// side), min-max normalized. No assertions attach to these; they exist to
// eyeball what the trained detectors look like.
inline void dump_first_layer_weights(const Network& net, int rows, int cols, int count,
                                     const std::string& outdir) {
    if (net.layers.empty()) throw std::invalid_argument("dump_first_layer_weights: empty network");
    const DenseLayer& l0 = net.layers.front();
    if (l0.in_dim() != 2 * rows * cols)
        throw std::invalid_argument("dump_first_layer_weights: dims do not match first layer");
    std::filesystem::create_directories(outdir);
    count = std::min<int>(count, l0.out_dim());
    for (int u = 0; u < count; ++u) {
        Image img = new_image(rows, 2 * cols, 0.0);
        double lo = l0.weights.row(u).minCoeff(), hi = l0.weights.row(u).maxCoeff();
        if (hi <= lo) hi = lo + 1.0;
        for (int half = 0; half < 2; ++half)
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) {
                    const double w = l0.weights(u, half * rows * cols + r * cols + c);
                    img.at(r, half * cols + c) = (w - lo) / (hi - lo);
                }
        char name[32];
        std::snprintf(name, sizeof name, "weight%03d.pgm", u);
        write_pgm(img, outdir + "/" + std::string(name));
    }
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    DatasetSpec data;
    std::vector<int> hidden = {256, 256, 256};
    TrainConfig train;
    std::string outdir;
};

inline std::string hidden_to_string(const std::vector<int>& hidden) {
    std::ostringstream os;
    for (std::size_t i = 0; i < hidden.size(); ++i) os << (i ? "," : "") << hidden[i];
    return os.str();
}

inline std::vector<int> hidden_from_string(const std::string& s) {
    std::vector<int> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ','))
        if (!tok.empty()) out.push_back(std::stoi(tok));
    return out;
}

inline std::string config_echo(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << "op=" << op_name(cfg.data.op) << " mode=" << mode_name(cfg.data.mode)
       << " digits=" << cfg.data.digits << " train_n=" << cfg.data.train_n
       << " test_n=" << cfg.data.test_n << " sigma=" << detail::fmt_double(cfg.data.noise_sigma)
       << " data_seed=" << cfg.data.seed << " hidden=" << hidden_to_string(cfg.hidden)
       << " lr=" << detail::fmt_double(cfg.train.learning_rate)
       << " momentum=" << detail::fmt_double(cfg.train.momentum)
       << " batch=" << cfg.train.batch_size << " epochs=" << cfg.train.epochs
       << " clip=" << detail::fmt_double(cfg.train.grad_clip)
       << " train_seed=" << cfg.train.seed;
    return os.str();
}

struct ExperimentArtifacts {
    Network net;
    TrainHistory history;
    MetricsReport report;
};

// gen + train + eval, deterministic in (config, font).
inline ExperimentArtifacts run_experiment(const ExperimentConfig& cfg, const Font& font,
                                          bool verbose = false) {
    const auto t0 = std::chrono::steady_clock::now();
    auto [train_ds, test_ds] = generate_dataset(cfg.data, font);
    Rng init_rng(mix_seed(cfg.train.seed, 0xB00Du));
    ExperimentArtifacts art;
    art.net = build_network(train_ds.input_dim(), cfg.hidden, train_ds.target_dim(), init_rng);
    if (verbose)
        std::cout << "training " << config_echo(cfg) << "\n";
    art.history = train(art.net, train_ds, cfg.train);
    if (verbose && !art.history.epoch_loss.empty())
        std::cout << "final epoch loss (mean per pixel): " << art.history.epoch_loss.back() << "\n";
    art.report = evaluate(art.net, test_ds, font);
    art.report.config_echo = config_echo(cfg);
    art.report.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return art;
}

// ---------------------------------------------------------------------------
// Table 1 reproduction
// ---------------------------------------------------------------------------

struct Table1Cell {
    std::string row_label;  // Add / Subtract / Multiply / Roman Addition
    bool pictures = true;
    double reference_pct = 0.0;
    ExperimentConfig cfg;
};

// "desk" shrinks digit counts and budgets to laptop scale while keeping each
// row's qualitative outcome; "paper" uses the published sizes.
inline std::vector<Table1Cell> table1_profile(const std::string& profile) {
    const bool paper = profile == "paper";
    if (!paper && profile != "desk")
        throw std::invalid_argument("table1_profile: profile must be 'desk' or 'paper'");

    auto make = [&](const std::string& label, OpKind op, bool pictures, double ref,
                    int digits, std::int64_t train_n, std::int64_t test_n,
                    std::vector<int> hidden, int epochs, std::uint64_t seed) {
        Table1Cell cell;
        cell.row_label = label;
        cell.pictures = pictures;
        cell.reference_pct = ref;
        cell.cfg.data.op = op;
        cell.cfg.data.mode = pictures ? SampleMode::Visual : SampleMode::OneHot;
        cell.cfg.data.digits = digits;
        cell.cfg.data.train_n = train_n;
        cell.cfg.data.test_n = test_n;
        cell.cfg.data.seed = mix_seed(900, seed);
        cell.cfg.hidden = std::move(hidden);
        cell.cfg.train.epochs = epochs;
        cell.cfg.train.seed = mix_seed(901, seed);
        return cell;
    };

    std::vector<Table1Cell> cells;
    if (paper) {
        cells.push_back(make("Add", OpKind::Add, true, 1.9, 7, 150000, 30000, {256, 256, 256}, 50, 1));
        cells.push_back(make("Add", OpKind::Add, false, 1.7, 7, 150000, 30000, {256}, 50, 2));
        cells.push_back(make("Subtract", OpKind::Sub, true, 3.2, 7, 150000, 30000, {256, 256, 256}, 50, 3));
        cells.push_back(make("Subtract", OpKind::Sub, false, 2.1, 7, 150000, 30000, {256}, 50, 4));
        cells.push_back(make("Multiply", OpKind::Mul, true, 71.5, 7, 150000, 30000,
                             {256, 256, 256, 256, 256}, 50, 5));
        cells.push_back(make("Multiply", OpKind::Mul, false, 37.6, 7, 150000, 30000, {256, 256, 256}, 50, 6));
        cells.push_back(make("Roman Addition", OpKind::RomanAdd, true, 74.3, 7, 150000, 30000,
                             {256, 256, 256, 256, 256}, 50, 7));
        cells.push_back(make("Roman Addition", OpKind::RomanAdd, false, 0.7, 7, 150000, 30000,
                             {256, 256, 256}, 50, 8));
    } else {
        cells.push_back(make("Add", OpKind::Add, true, 1.9, 3, 50000, 5000, {256, 256, 256}, 30, 1));
        cells.push_back(make("Add", OpKind::Add, false, 1.7, 7, 150000, 30000, {256}, 50, 2));
        cells.push_back(make("Subtract", OpKind::Sub, true, 3.2, 3, 50000, 5000, {256, 256, 256}, 30, 3));
        cells.push_back(make("Subtract", OpKind::Sub, false, 2.1, 7, 150000, 30000, {256}, 50, 4));
        cells.push_back(make("Multiply", OpKind::Mul, true, 71.5, 3, 50000, 5000, {256, 256, 256}, 30, 5));
        cells.push_back(make("Multiply", OpKind::Mul, false, 37.6, 7, 50000, 5000, {256, 256, 256}, 30, 6));
        cells.push_back(make("Roman Addition", OpKind::RomanAdd, true, 74.3, 4, 50000, 5000,
                             {256, 256, 256}, 30, 7));
        cells.push_back(make("Roman Addition", OpKind::RomanAdd, false, 0.7, 4, 50000, 5000,
                             {256, 256, 256}, 30, 8));
    }
    return cells;
}

inline std::string run_table1(const std::vector<Table1Cell>& cells, const Font& font,
                              bool verbose = false) {
    struct Row {
        std::string label;
        double pict_measured = -1, pict_ref = 0, onehot_measured = -1, onehot_ref = 0;
    };
    std::vector<Row> rows;
    auto row_for = [&rows](const std::string& label) -> Row& {
        for (Row& r : rows)
            if (r.label == label) return r;
        rows.push_back(Row{label, -1, 0, -1, 0});
        return rows.back();
    };
    for (const Table1Cell& cell : cells) {
        const ExperimentArtifacts art = run_experiment(cell.cfg, font, verbose);
        Row& row = row_for(cell.row_label);
        if (cell.pictures) {
            row.pict_measured = 100.0 * art.report.digit_error;
            row.pict_ref = cell.reference_pct;
        } else {
            row.onehot_measured = 100.0 * art.report.digit_error;
            row.onehot_ref = cell.reference_pct;
        }
    }
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-16s %22s   %22s\n", "Operation", "Pictures", "1-hot Vectors");
    os << buf;
    std::snprintf(buf, sizeof buf, "%-16s %10s %11s   %10s %11s\n", "", "measured", "reference",
                  "measured", "reference");
    os << buf;
    for (const Row& r : rows) {
        auto cellstr = [](double v) {
            if (v < 0) return std::string("-");
            char b[32];
            std::snprintf(b, sizeof b, "%.1f%%", v);
            return std::string(b);
        };
        std::snprintf(buf, sizeof buf, "%-16s %10s %10.1f%%   %10s %10.1f%%\n", r.label.c_str(),
                      cellstr(r.pict_measured).c_str(), r.pict_ref,
                      cellstr(r.onehot_measured).c_str(), r.onehot_ref);
        os << buf;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// CLI
// ---------------------------------------------------------------------------

namespace cli {

inline OpKind parse_op(const std::string& s) {
    if (s == "add") return OpKind::Add;
    if (s == "sub") return OpKind::Sub;
    if (s == "mul") return OpKind::Mul;
    if (s == "roman-add") return OpKind::RomanAdd;
    throw std::invalid_argument("--op must be one of add, sub, mul, roman-add");
}

inline SampleMode parse_mode(const std::string& s) {
    if (s == "visual") return SampleMode::Visual;
    if (s == "onehot") return SampleMode::OneHot;
    throw std::invalid_argument("--mode must be visual or onehot");
}

struct CommonOpts {
    std::string op = "add";
    std::string mode = "visual";
    int digits = 7;
    std::int64_t train_n = 150000;
    std::int64_t test_n = 30000;
    double noise_sigma = 0.0;
    std::string hidden = "256,256,256";
    double lr = 0.1;
    double momentum = 0.9;
    int batch = 256;
    int epochs = 50;
    double clip = 2.0;
    std::uint64_t seed = 0;
    std::string out = ".";
    std::string font_file;
};

inline const Font& resolve_font(const std::string& font_file, Font& storage) {
    if (font_file.empty()) return builtin_font();
    storage = read_font(font_file);
    return storage;
}

}  // namespace cli

namespace cli {

// Expands `--config FILE` into the equivalent command-line flags. Keys match
// the long flag names without the leading dashes; flags given explicitly on
// the command line win over the file.
inline std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::string config_path;
    std::vector<std::string> out;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config_path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
        } else {
            out.push_back(args[i]);
        }
    }
    if (config_path.empty()) return out;
    std::ifstream f(config_path);
    if (!f) throw IoError("config: cannot open " + config_path);
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected key=value line: " + line);
        const std::string flag = "--" + line.substr(0, eq);
        bool overridden = false;
        for (const std::string& a : out)
            if (a == flag || a.rfind(flag + "=", 0) == 0) {
                overridden = true;
                break;
            }
        if (overridden) continue;
        out.push_back(flag);
        out.push_back(line.substr(eq + 1));
    }
    return out;
}

}  // namespace cli

// Exit codes: 0 success, 1 validation/usage error, 2 I/O error.
inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"visual arithmetic experiments"};
    app.require_subcommand(1);

    cli::CommonOpts o;
    double delta = 0.01, gain = 50.0;
    std::string data_dir = ".";
    std::string model_file;
    std::string profile = "desk";
    int count = 3;
    int weight_dump = 0;

    auto add_data_opts = [&o](CLI::App* cmd) {
        cmd->add_option("--op", o.op, "Operation: add, sub, mul, roman-add");
        cmd->add_option("--mode", o.mode, "Representation: visual or onehot");
        cmd->add_option("--digits", o.digits, "Digit count M");
        cmd->add_option("--train-n", o.train_n, "Training sample count");
        cmd->add_option("--test-n", o.test_n, "Test sample count");
        cmd->add_option("--noise-sigma", o.noise_sigma, "Gaussian noise sigma (visual only)");
        cmd->add_option("--seed", o.seed, "Random seed");
    };
    auto add_train_opts = [&o](CLI::App* cmd) {
        cmd->add_option("--hidden", o.hidden, "Hidden layer sizes, comma separated");
        cmd->add_option("--lr", o.lr, "Learning rate");
        cmd->add_option("--momentum", o.momentum, "Momentum");
        cmd->add_option("--batch", o.batch, "Mini-batch size");
        cmd->add_option("--epochs", o.epochs, "Epochs");
        cmd->add_option("--clip", o.clip, "Gradient norm ceiling (0 disables)");
    };
    std::string config_dummy;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--out", o.out, "Output directory");
        cmd->add_option("--font", o.font_file, "Font file (defaults to the builtin font)");
        cmd->add_option("--config", config_dummy,
                        "key=value config file with the same keys as the flags");
    };

    CLI::App* gen = app.add_subcommand("gen", "Generate a train/test dataset pair");
    add_data_opts(gen);
    add_common(gen);

    CLI::App* train_cmd = app.add_subcommand("train", "Train a network on a dataset");
    train_cmd->add_option("--data", data_dir, "Directory containing train.ds");
    add_train_opts(train_cmd);
    train_cmd->add_option("--seed", o.seed, "Random seed");
    add_common(train_cmd);

    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a test dataset");
    eval_cmd->add_option("--data", data_dir, "Directory containing test.ds");
    eval_cmd->add_option("--model", model_file, "Model file (defaults to <out>/model.vnet)");
    add_common(eval_cmd);

    CLI::App* construct_cmd = app.add_subcommand("construct", "Build the hand-designed adder");
    construct_cmd->add_option("--digits", o.digits, "Digit count M");
    construct_cmd->add_option("--delta", delta, "Gate sharpness");
    construct_cmd->add_option("--gain", gain, "Painter logit magnitude");
    add_common(construct_cmd);

    CLI::App* verify_cmd = app.add_subcommand("verify", "Brute-force check the constructed adder");
    verify_cmd->add_option("--digits", o.digits, "Digit count M");
    verify_cmd->add_option("--delta", delta, "Gate sharpness");
    verify_cmd->add_option("--gain", gain, "Painter logit magnitude");
    add_common(verify_cmd);

    CLI::App* render_cmd = app.add_subcommand("render", "Dump example predictions as PGM files");
    render_cmd->add_option("--data", data_dir, "Directory containing test.ds");
    render_cmd->add_option("--model", model_file, "Model file");
    render_cmd->add_option("--count", count, "Number of samples to render");
    render_cmd->add_option("--weights", weight_dump, "Also dump this many first-layer filters");
    add_common(render_cmd);

    CLI::App* report_cmd = app.add_subcommand("report", "Reproduce the error-rate table");
    report_cmd->add_option("--profile", profile, "Scale profile: desk or paper");
    add_common(report_cmd);

    std::vector<std::string> expanded;
    try {
        expanded = cli::expand_config(std::vector<std::string>(argv + 1, argv + argc));
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::vector<const char*> cargv;
    cargv.push_back(argc > 0 ? argv[0] : "varith");
    for (const std::string& s : expanded) cargv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(cargv.size()), cargv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        Font font_storage;
        const Font& font = cli::resolve_font(o.font_file, font_storage);

        if (gen->parsed()) {
            DatasetSpec spec;
            spec.op = cli::parse_op(o.op);
            spec.mode = cli::parse_mode(o.mode);
            spec.digits = o.digits;
            spec.train_n = o.train_n;
            spec.test_n = o.test_n;
            spec.noise_sigma = o.noise_sigma;
            spec.seed = o.seed;
            const auto [train_ds, test_ds] = generate_dataset(spec, font);
            std::filesystem::create_directories(o.out);
            write_dataset(train_ds, o.out + "/train.ds");
            write_dataset(test_ds, o.out + "/test.ds");
            std::cout << "wrote " << train_ds.samples.size() << " train and "
                      << test_ds.samples.size() << " test samples to " << o.out << "\n";
        } else if (train_cmd->parsed()) {
            const auto t0 = std::chrono::steady_clock::now();
            const Dataset train_ds = read_dataset(data_dir + "/train.ds");
            TrainConfig tc;
            tc.learning_rate = o.lr;
            tc.momentum = o.momentum;
            tc.batch_size = o.batch;
            tc.epochs = o.epochs;
            tc.grad_clip = o.clip;
            tc.seed = o.seed;
            Rng init_rng(mix_seed(tc.seed, 0xB00Du));
            Network net = build_network(train_ds.input_dim(), hidden_from_string(o.hidden),
                                        train_ds.target_dim(), init_rng);
            const TrainHistory hist = train(net, train_ds, tc);
            std::filesystem::create_directories(o.out);
            save_net(net, o.out + "/model.vnet");
            std::ofstream hf(o.out + "/history.txt");
            for (std::size_t e = 0; e < hist.epoch_loss.size(); ++e)
                hf << "epoch " << e << " loss: " << detail::fmt_double(hist.epoch_loss[e]) << "\n";
            std::cout << "trained " << o.epochs << " epochs; final loss "
                      << (hist.epoch_loss.empty() ? 0.0 : hist.epoch_loss.back()) << "\n";
            std::cout << "wall_time_sec: "
                      << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                      << "\n";
        } else if (eval_cmd->parsed()) {
            const Dataset test_ds = read_dataset(data_dir + "/test.ds");
            const std::string mpath = model_file.empty() ? o.out + "/model.vnet" : model_file;
            const Network net = load_net(mpath);
            MetricsReport rep = evaluate(net, test_ds, font);
            std::filesystem::create_directories(o.out);
            std::ofstream rf(o.out + "/report.txt");
            rf << serialize_report(rep);
            std::cout << serialize_report(rep);
            std::cout << "wall_time_sec: " << rep.wall_time_sec << "\n";
        } else if (construct_cmd->parsed()) {
            const ConstructiveAdder adder = build_full_adder(font, o.digits, GateParams{delta, gain});
            std::filesystem::create_directories(o.out);
            save_net(adder.net, o.out + "/model.vnet");
            std::cout << "constructed adder for " << o.digits << " digits: layers";
            for (const auto& l : adder.net.layers) std::cout << " " << l.out_dim();
            std::cout << "\n";
        } else if (verify_cmd->parsed()) {
            const VerifyReport rep = verify_constructive(o.digits, GateParams{delta, gain}, font);
            const std::string text = verify_report_text(rep);
            std::filesystem::create_directories(o.out);
            std::ofstream rf(o.out + "/verify_report.txt");
            rf << text;
            std::cout << text;
            if (rep.digit_errors != 0) return 1;
        } else if (render_cmd->parsed()) {
            const Dataset test_ds = read_dataset(data_dir + "/test.ds");
            const std::string mpath = model_file.empty() ? o.out + "/model.vnet" : model_file;
            const Network net = load_net(mpath);
            render_examples(net, test_ds, count, o.out, font);
            if (weight_dump > 0)
                dump_first_layer_weights(net, test_ds.rows, test_ds.cols, weight_dump,
                                         o.out + "/weights");
            std::cout << "rendered " << std::min<std::size_t>(count, test_ds.samples.size())
                      << " samples to " << o.out << "\n";
        } else if (report_cmd->parsed()) {
            const std::vector<Table1Cell> cells = table1_profile(profile);
            const std::string table = run_table1(cells, font, true);
            std::filesystem::create_directories(o.out);
            std::ofstream tf(o.out + "/table1.txt");
            tf << table;
            std::cout << table;
        }
        return 0;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace varith
