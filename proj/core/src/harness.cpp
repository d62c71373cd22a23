#include "grnn/harness.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <variant>

#include "grnn/errors.hpp"
#include "grnn/optim.hpp"

namespace grnn {

namespace {

// Sub-stream tags for SeededRng::fork.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kSyntheticStream = 3;

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t offset, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= std::uint64_t{in[offset + i]} << (8 * i);
    return v;
}

class Optimizer {
public:
    Optimizer(const RunConfig& config, std::size_t slots) {
        if (config.optimizer == OptimizerKind::Adam) {
            AdamConfig c;
            c.learning_rate = config.learning_rate;
            impl_.emplace<Adam>(slots, c);
        } else {
            RmsPropConfig c;
            c.learning_rate = config.learning_rate;
            impl_.emplace<RmsProp>(slots, c);
        }
    }

    void update(std::span<Real> params, std::span<const Real> grads) {
        std::visit([&](auto& opt) { opt.update(params, grads); }, impl_);
    }

private:
    std::variant<RmsProp, Adam> impl_{std::in_place_type<RmsProp>, 0};
};

void clip_global_norm(std::vector<Real>& grads, Real max_norm) {
    const Real norm = std::sqrt(dot(grads, grads));
    if (norm > max_norm && norm > 0.0) {
        const Real scale = max_norm / norm;
        for (Real& g : grads) g *= scale;
    }
}

} // namespace

std::string_view sequence_mode_name(SequenceMode mode) noexcept {
    switch (mode) {
    case SequenceMode::Rows28: return "rows28";
    case SequenceMode::Pixels784: return "pixels784";
    case SequenceMode::Synthetic: return "synthetic";
    }
    return "?";
}

std::optional<SequenceMode> parse_sequence_mode(std::string_view name) noexcept {
    for (auto mode : {SequenceMode::Rows28, SequenceMode::Pixels784, SequenceMode::Synthetic}) {
        if (sequence_mode_name(mode) == name) return mode;
    }
    return std::nullopt;
}

std::string_view optimizer_name(OptimizerKind kind) noexcept {
    return kind == OptimizerKind::Adam ? "adam" : "rmsprop";
}

std::optional<OptimizerKind> parse_optimizer(std::string_view name) noexcept {
    if (name == "rmsprop") return OptimizerKind::RmsProp;
    if (name == "adam") return OptimizerKind::Adam;
    return std::nullopt;
}

std::size_t RunConfig::hidden_size() const noexcept {
    if (hidden) return *hidden;
    switch (sequence) {
    case SequenceMode::Rows28: return 50;
    case SequenceMode::Pixels784: return 100;
    case SequenceMode::Synthetic: return 16;
    }
    return 50;
}

int RunConfig::epoch_count() const noexcept {
    if (epochs) return *epochs;
    switch (sequence) {
    case SequenceMode::Rows28: return 50;
    case SequenceMode::Pixels784: return 25;
    case SequenceMode::Synthetic: return 20;
    }
    return 1;
}

void RunConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw InputError("learning rate must be positive");
    }
    if (epoch_count() < 1) throw InputError("epochs must be at least 1");
    if (batch_size < 1) throw InputError("batch size must be at least 1");
    if (hidden_size() < 1) throw InputError("hidden size must be at least 1");
    if (clip_norm && !(*clip_norm > 0.0)) throw InputError("clip norm must be positive");
}

std::filesystem::path resolve_data_dir(const RunConfig& config) {
    if (!config.data_dir.empty()) return config.data_dir;
    if (const char* env = std::getenv("GRNN_DATA_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    throw IoError("no MNIST data directory: pass --data-dir or set GRNN_DATA_DIR");
}

Datasets load_datasets(const RunConfig& config) {
    if (config.sequence == SequenceMode::Synthetic) {
        const SyntheticSpec& s = config.synthetic;
        SeededRng rng = SeededRng(config.seed).fork(kSyntheticStream);
        // One draw so both splits share the per-class patterns.
        SequenceDataset all = synthetic_dataset(rng, s.length, s.input_size, s.classes,
                                                s.train_count + s.test_count, s.noise);
        Datasets out{all, all};
        out.train.examples.resize(s.train_count);
        out.test.examples.erase(out.test.examples.begin(),
                                out.test.examples.begin() +
                                    static_cast<std::ptrdiff_t>(s.train_count));
        if (out.test.examples.empty()) throw InputError("synthetic test split is empty");
        return out;
    }
    const MnistSplit raw = load_mnist_dir(resolve_data_dir(config));
    const RawImages train = config.train_limit ? raw.train.head(*config.train_limit) : raw.train;
    const RawImages test = config.test_limit ? raw.test.head(*config.test_limit) : raw.test;
    if (config.sequence == SequenceMode::Rows28) {
        return {to_row_sequences(train), to_row_sequences(test)};
    }
    return {to_pixel_sequences(train), to_pixel_sequences(test)};
}

TrainResult train_model(const RunConfig& config, const Datasets& data,
                        const EpochObserver& observer) {
    config.validate();
    if (data.train.empty() || data.test.empty()) throw InputError("empty train or test split");
    const SeededRng root(config.seed);
    SeededRng init_rng = root.fork(kInitStream);
    SeededRng shuffle_rng = root.fork(kShuffleStream);

    TrainResult result;
    result.params = init_classifier(config.cell, config.hidden_size(), data.train.input_size,
                                    data.train.classes, init_rng);
    ClassifierParams& params = result.params;
    ClassifierParams accum = ClassifierParams::zeros(config.cell, config.hidden_size(),
                                                     data.train.input_size, data.train.classes);
    std::vector<Real> flat = enumerate_flat(params);
    const std::vector<Real> zeros(flat.size(), 0.0);
    Optimizer optimizer(config, flat.size());

    for (int epoch = 1; epoch <= config.epoch_count(); ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        const auto batches = batch_iter(data.train.size(), config.batch_size, shuffle_rng, true);
        Real loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            assign_flat(accum, zeros);
            Real batch_loss = 0.0;
            for (std::size_t idx : batches[b]) {
                const LabeledSequence& ex = data.train.examples[idx];
                PredictionResult pred;
                const Real loss =
                    accumulate_loss_and_grad(params, ex.xs, ex.label, accum, &pred);
                if (!std::isfinite(loss)) {
                    throw DivergenceError(epoch, static_cast<int>(b + 1),
                                          "non-finite loss at epoch " + std::to_string(epoch) +
                                              ", batch " + std::to_string(b + 1));
                }
                batch_loss += loss;
                if (pred.predicted == ex.label) ++correct;
            }
            if (epoch == 1 && b == 0) {
                result.initial_loss = batch_loss / static_cast<Real>(batches[b].size());
            }
            loss_sum += batch_loss;

            std::vector<Real> grads = enumerate_flat(accum);
            const Real scale = 1.0 / static_cast<Real>(batches[b].size());
            for (Real& g : grads) g *= scale;
            if (config.clip_norm) clip_global_norm(grads, *config.clip_norm);
            try {
                optimizer.update(flat, grads);
            } catch (const NumericError& e) {
                throw DivergenceError(epoch, static_cast<int>(b + 1),
                                      std::string(e.what()) + " at epoch " +
                                          std::to_string(epoch) + ", batch " +
                                          std::to_string(b + 1));
            }
            assign_flat(params, flat);
        }
        const auto stop = std::chrono::steady_clock::now();

        EpochMetrics m;
        m.epoch = epoch;
        m.train_loss = loss_sum / static_cast<Real>(data.train.size());
        m.train_accuracy = static_cast<Real>(correct) / static_cast<Real>(data.train.size());
        m.test_accuracy = accuracy(params, data.test);
        m.seconds = std::chrono::duration<Real>(stop - start).count();
        result.metrics.push_back(m);
        if (observer) observer(m);
    }
    return result;
}

std::vector<EpochMetrics> run_train(const RunConfig& config, const EpochObserver& observer) {
    config.validate();
    const Datasets data = load_datasets(config);
    TrainResult result = train_model(config, data, observer);
    if (!config.metrics_path.empty()) {
        write_metrics_csv(config.metrics_path, result.metrics, config.deterministic);
    }
    if (!config.checkpoint_path.empty()) save_checkpoint(config.checkpoint_path, result.params);
    return result.metrics;
}

Real run_eval(const std::filesystem::path& checkpoint, const RunConfig& config) {
    const ClassifierParams params = load_checkpoint(checkpoint);
    const Datasets data = load_datasets(config);
    const CellParams& cell = params.cell;
    if (cell.kind != config.cell || cell.n != config.hidden_size() ||
        cell.m != data.test.input_size || params.classes() != data.test.classes) {
        std::ostringstream msg;
        msg << "checkpoint holds " << cell_name(cell.kind) << " n=" << cell.n << " m=" << cell.m
            << " k=" << params.classes() << ", configuration expects "
            << cell_name(config.cell) << " n=" << config.hidden_size()
            << " m=" << data.test.input_size << " k=" << data.test.classes;
        throw FormatError(msg.str());
    }
    return accuracy(params, data.test);
}

void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& metrics,
                       bool zero_seconds) {
    out << "epoch,train_loss,train_acc,test_acc,seconds\n";
    out << std::setprecision(17);
    for (const auto& m : metrics) {
        out << m.epoch << ',' << m.train_loss << ',' << m.train_accuracy << ','
            << m.test_accuracy << ',' << (zero_seconds ? 0.0 : m.seconds) << '\n';
    }
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& metrics,
                       bool zero_seconds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write metrics file " + path.string());
    write_metrics_csv(out, metrics, zero_seconds);
    if (!out) throw IoError("failed writing metrics file " + path.string());
}

std::vector<std::uint8_t> encode_checkpoint(const ClassifierParams& params, int precision) {
    if (precision != 4 && precision != 8) throw InputError("checkpoint precision must be 4 or 8");
    const std::vector<Real> flat = enumerate_flat(params);
    std::vector<std::uint8_t> out;
    out.reserve(kCheckpointHeaderBytes + flat.size() * static_cast<std::size_t>(precision));
    for (char c : {'G', 'R', 'N', 'N'}) out.push_back(static_cast<std::uint8_t>(c));
    put_le(out, kCheckpointVersion, 4);
    out.push_back(static_cast<std::uint8_t>(params.cell.kind));
    out.push_back(static_cast<std::uint8_t>(precision));
    put_le(out, params.cell.n, 4);
    put_le(out, params.cell.m, 4);
    put_le(out, params.classes(), 4);
    for (Real v : flat) {
        if (precision == 8) {
            put_le(out, std::bit_cast<std::uint64_t>(v), 8);
        } else {
            put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
        }
    }
    return out;
}

ClassifierParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kCheckpointHeaderBytes) throw FormatError("checkpoint header truncated");
    if (bytes[0] != 'G' || bytes[1] != 'R' || bytes[2] != 'N' || bytes[3] != 'N') {
        throw FormatError("not a checkpoint (bad magic)");
    }
    const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint8_t kind_byte = bytes[8];
    if (kind_byte > static_cast<std::uint8_t>(CellKind::MGU3)) {
        throw FormatError("unknown cell kind " + std::to_string(kind_byte));
    }
    const int precision = bytes[9];
    if (precision != 4 && precision != 8) {
        throw FormatError("unsupported checkpoint precision " + std::to_string(precision));
    }
    const std::size_t n = get_le(bytes, 10, 4);
    const std::size_t m = get_le(bytes, 14, 4);
    const std::size_t k = get_le(bytes, 18, 4);
    if (n == 0 || m == 0 || k == 0) throw FormatError("checkpoint has a zero dimension");
    // Bound the sizes by the payload before allocating anything.
    const std::size_t payload = bytes.size() - kCheckpointHeaderBytes;
    const std::size_t available = payload / static_cast<std::size_t>(precision);
    const auto kind = static_cast<CellKind>(kind_byte);
    if (n > available || m > available || k > available ||
        param_count(kind, n, m) + k * n + k != available ||
        payload % static_cast<std::size_t>(precision) != 0) {
        throw FormatError("checkpoint payload size does not match its header");
    }

    ClassifierParams params = ClassifierParams::zeros(kind, n, m, k);
    std::vector<Real> flat(params.scalar_count());
    std::size_t offset = kCheckpointHeaderBytes;
    for (Real& v : flat) {
        if (precision == 8) {
            v = std::bit_cast<double>(get_le(bytes, offset, 8));
        } else {
            v = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, offset, 4)));
        }
        offset += static_cast<std::size_t>(precision);
    }
    assign_flat(params, flat);
    return params;
}

void save_checkpoint(const std::filesystem::path& path, const ClassifierParams& params,
                     int precision) {
    const auto bytes = encode_checkpoint(params, precision);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing checkpoint " + path.string());
}

ClassifierParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                          std::istreambuf_iterator<char>()};
    return decode_checkpoint(bytes);
}

bool GradCheckReport::passed() const noexcept {
    for (const auto& row : rows) {
        if (!row.passed) return false;
    }
    return !rows.empty();
}

GradCheckInstance make_gradcheck_instance(CellKind kind, SeededRng& rng, std::size_t max_size) {
    auto size = [&](std::size_t lo) { return lo + rng.uniform_index(max_size - lo + 1); };
    const std::size_t n = size(1);
    const std::size_t m = size(1);
    const std::size_t length = size(1);
    GradCheckInstance inst{CellParams::zeros(kind, n, m), Matrix(length, m), Vector(n)};
    std::vector<Real> flat(inst.params.scalar_count());
    for (Real& v : flat) v = rng.uniform(-1.0, 1.0);
    assign_flat(inst.params, flat);
    for (Real& v : inst.xs.span()) v = rng.uniform(-1.0, 1.0);
    for (Real& v : inst.target) v = rng.uniform(-1.0, 1.0);
    return inst;
}

GradCheckReport run_gradcheck(const GradCheckOptions& options) {
    GradCheckReport report;
    report.tolerance = options.tolerance;
    for (CellKind kind : kAllCellKinds) {
        SeededRng rng = SeededRng(options.seed).fork(static_cast<std::uint64_t>(kind) + 100);
        GradCheckRow row{kind, options.instances, 0.0, false};
        for (std::size_t i = 0; i < options.instances; ++i) {
            GradCheckInstance inst = make_gradcheck_instance(kind, rng, options.max_size);
            const GradCheckResult r = gradient_check(inst.params, inst.xs,
                                                     quadratic_loss(inst.target), 1e-5,
                                                     options.backward);
            row.max_relative_error = std::max(row.max_relative_error, r.max_relative_error);
        }
        row.passed = row.max_relative_error < options.tolerance;
        report.rows.push_back(row);
    }
    return report;
}

void print_gradcheck_report(std::ostream& out, const GradCheckReport& report) {
    out << "cell   instances  max_rel_error  status\n";
    for (const auto& row : report.rows) {
        out << std::left << std::setw(7) << cell_name(row.kind) << std::right << std::setw(9)
            << row.instances << "  " << std::scientific << std::setprecision(3)
            << std::setw(13) << row.max_relative_error << "  "
            << (row.passed ? "pass" : "FAIL") << '\n'
            << std::defaultfloat;
    }
    out << (report.passed() ? "all cells pass" : "gradient check FAILED") << " (tolerance "
        << report.tolerance << ")\n";
}

std::vector<ParamCountRow> run_paramcount(std::size_t n, std::size_t m,
                                          std::optional<std::size_t> k) {
    if (n == 0 || m == 0) throw InputError("hidden and input sizes must be at least 1");
    std::vector<ParamCountRow> rows;
    for (CellKind kind : kAllCellKinds) {
        ParamCountRow row{kind, param_count(kind, n, m), std::nullopt};
        if (k) row.with_readout = row.cell + *k * n + *k;
        rows.push_back(row);
    }
    return rows;
}

void print_paramcount(std::ostream& out, std::size_t n, std::size_t m,
                      const std::vector<ParamCountRow>& rows) {
    out << "n=" << n << " m=" << m << '\n';
    const bool totals = !rows.empty() && rows.front().with_readout.has_value();
    out << "cell   params" << (totals ? "  with_readout" : "") << '\n';
    for (const auto& row : rows) {
        out << std::left << std::setw(7) << cell_name(row.kind) << std::right << std::setw(6)
            << row.cell;
        if (row.with_readout) out << std::setw(14) << *row.with_readout;
        out << '\n';
    }
}

} // namespace grnn
