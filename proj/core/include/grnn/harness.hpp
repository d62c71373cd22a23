#pragma once

// Experiment runner: configuration, the training loop, evaluation, metrics
// CSV, checkpoints, and the gradient-check / parameter-count utilities behind
// the `grnn` command line tool.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "grnn/bptt.hpp"
#include "grnn/cells.hpp"
#include "grnn/data.hpp"
#include "grnn/model.hpp"

namespace grnn {

enum class SequenceMode { Rows28, Pixels784, Synthetic };
enum class OptimizerKind { RmsProp, Adam };

std::string_view sequence_mode_name(SequenceMode mode) noexcept;
std::optional<SequenceMode> parse_sequence_mode(std::string_view name) noexcept;
std::string_view optimizer_name(OptimizerKind kind) noexcept;
std::optional<OptimizerKind> parse_optimizer(std::string_view name) noexcept;

struct SyntheticSpec {
    std::size_t length = 8;
    std::size_t input_size = 4;
    std::size_t classes = 10;
    std::size_t train_count = 500;
    std::size_t test_count = 200;
    Real noise = 0.1;
};

struct RunConfig {
    CellKind cell = CellKind::MGU2;
    std::optional<std::size_t> hidden; // default: 50 rows28, 100 pixels784, 16 synthetic
    SequenceMode sequence = SequenceMode::Rows28;
    Real learning_rate = 1e-3;
    OptimizerKind optimizer = OptimizerKind::RmsProp;
    std::size_t batch_size = 100;
    std::optional<int> epochs; // default: 50 rows28, 25 pixels784, 20 synthetic
    std::uint64_t seed = 1;
    std::filesystem::path data_dir; // empty: GRNN_DATA_DIR
    std::filesystem::path metrics_path;
    std::filesystem::path checkpoint_path;
    std::optional<Real> clip_norm;
    bool deterministic = false;

    // Use only the first N images of a split (MNIST modes).
    std::optional<std::size_t> train_limit;
    std::optional<std::size_t> test_limit;
    SyntheticSpec synthetic;

    std::size_t hidden_size() const noexcept;
    int epoch_count() const noexcept;
    // Throws InputError on a bad learning rate, epoch count or batch size.
    void validate() const;
};

struct EpochMetrics {
    int epoch = 0;
    Real train_loss = 0.0;
    Real train_accuracy = 0.0;
    Real test_accuracy = 0.0;
    Real seconds = 0.0; // wall time of the training pass only
};

struct Datasets {
    SequenceDataset train;
    SequenceDataset test;
};

std::filesystem::path resolve_data_dir(const RunConfig& config);
Datasets load_datasets(const RunConfig& config);

struct TrainResult {
    ClassifierParams params;
    std::vector<EpochMetrics> metrics;
    Real initial_loss = 0.0; // mean loss of the first batch before any update
};

using EpochObserver = std::function<void(const EpochMetrics&)>;

// Trains on already-loaded data. Throws DivergenceError on a non-finite loss.
TrainResult train_model(const RunConfig& config, const Datasets& data,
                        const EpochObserver& observer = {});

// Loads data, trains, and writes the metrics CSV and final checkpoint when
// their paths are set.
std::vector<EpochMetrics> run_train(const RunConfig& config, const EpochObserver& observer = {});

Real run_eval(const std::filesystem::path& checkpoint, const RunConfig& config);

// Header `epoch,train_loss,train_acc,test_acc,seconds`. With `zero_seconds`
// the timing column is written as 0 so that reruns are byte-identical.
void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& metrics,
                       bool zero_seconds);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& metrics,
                       bool zero_seconds);

// Checkpoint layout, little-endian throughout:
//   "GRNN" | u32 version | u8 cell kind | u8 precision (4 or 8) | u32 n | u32 m | u32 k
//   then enumerate_flat(ClassifierParams) as floats of that precision.
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderBytes = 22;

std::vector<std::uint8_t> encode_checkpoint(const ClassifierParams& params, int precision = 8);
ClassifierParams decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const ClassifierParams& params,
                     int precision = 8);
ClassifierParams load_checkpoint(const std::filesystem::path& path);

struct GradCheckRow {
    CellKind kind = CellKind::SRNN;
    std::size_t instances = 0;
    Real max_relative_error = 0.0;
    bool passed = false;
};

struct GradCheckReport {
    std::vector<GradCheckRow> rows;
    Real tolerance = 1e-5;
    bool passed() const noexcept;
};

struct GradCheckOptions {
    std::uint64_t seed = 1;
    std::size_t instances = 10;
    std::size_t max_size = 6; // upper bound on n, m and T
    Real tolerance = 1e-5;
    BackwardFn backward; // empty: backward_sequence
};

// A seeded small gradient-check instance with unit-scale parameters.
struct GradCheckInstance {
    CellParams params;
    Matrix xs;
    Vector target;
};
GradCheckInstance make_gradcheck_instance(CellKind kind, SeededRng& rng, std::size_t max_size);

GradCheckReport run_gradcheck(const GradCheckOptions& options = {});
void print_gradcheck_report(std::ostream& out, const GradCheckReport& report);

struct ParamCountRow {
    CellKind kind = CellKind::SRNN;
    std::size_t cell = 0;
    std::optional<std::size_t> with_readout;
};

std::vector<ParamCountRow> run_paramcount(std::size_t n, std::size_t m,
                                          std::optional<std::size_t> k = std::nullopt);
void print_paramcount(std::ostream& out, std::size_t n, std::size_t m,
                      const std::vector<ParamCountRow>& rows);

} // namespace grnn
