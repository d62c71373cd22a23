// grnn: train, evaluate and inspect the recurrent sequence classifiers.
//
// Exit codes: 0 success, 1 usage error, 2 IO/format error, 3 numeric
// divergence, 4 gradient check failure.

#include <CLI11.hpp>

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "grnn/errors.hpp"
#include "grnn/harness.hpp"

namespace {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kIo = 2,
    kDivergence = 3,
    kGradcheckFailed = 4,
};

std::vector<std::string> cell_choices() {
    std::vector<std::string> out;
    for (auto kind : grnn::kAllCellKinds) out.emplace_back(grnn::cell_name(kind));
    return out;
}

struct ConfigFlags {
    grnn::RunConfig config;
    std::size_t hidden = 0;
    int epochs = 0;
    std::size_t train_limit = 0;
    std::size_t test_limit = 0;
    double clip = 0.0;
    std::string cell = "mgu2";
    std::string sequence = "rows28";
    std::string optimizer = "rmsprop";

    void add_model_flags(CLI::App& cmd) {
        cmd.add_option("--cell", cell, "Cell variant")
            ->transform(CLI::IsMember(cell_choices(), CLI::ignore_case))
            ->capture_default_str();
        cmd.add_option("--hidden", hidden, "Hidden units (default 50 rows28, 100 pixels784)");
        cmd.add_option("--seq", sequence, "Sequence representation")
            ->transform(CLI::IsMember({"rows28", "pixels784", "synthetic"}, CLI::ignore_case))
            ->capture_default_str();
        cmd.add_option("--seed", config.seed, "Random seed");
        cmd.add_option("--data-dir", config.data_dir,
                       "MNIST directory (falls back to GRNN_DATA_DIR)");
        cmd.add_option("--test-limit", test_limit, "Evaluate on the first N test images only");
        cmd.add_option("--noise", config.synthetic.noise, "Noise level of --seq synthetic");
    }

    void add_train_flags(CLI::App& cmd) {
        cmd.add_option("--lr", config.learning_rate, "Learning rate");
        cmd.add_option("--optimizer", optimizer, "Optimizer")
            ->transform(CLI::IsMember({"rmsprop", "adam"}, CLI::ignore_case))
            ->capture_default_str();
        cmd.add_option("--batch", config.batch_size, "Mini-batch size");
        cmd.add_option("--epochs", epochs, "Epochs (default 50 rows28, 25 pixels784)");
        cmd.add_option("--metrics", config.metrics_path, "Per-epoch metrics CSV output");
        cmd.add_option("--clip", clip, "Clip the batch gradient to this global norm");
        cmd.add_flag("--deterministic", config.deterministic,
                     "Write 0 in the seconds column so reruns are byte-identical");
        cmd.add_option("--train-limit", train_limit, "Train on the first N images only");
    }

    grnn::RunConfig finish() const {
        grnn::RunConfig out = config;
        // IsMember with ignore_case hands back the canonical spelling.
        out.cell = *grnn::parse_cell_kind(cell);
        out.sequence = *grnn::parse_sequence_mode(sequence);
        out.optimizer = *grnn::parse_optimizer(optimizer);
        if (hidden > 0) out.hidden = hidden;
        if (epochs != 0) out.epochs = epochs;
        if (train_limit > 0) out.train_limit = train_limit;
        if (test_limit > 0) out.test_limit = test_limit;
        if (clip != 0.0) out.clip_norm = clip;
        return out;
    }
};

int run_train_command(const ConfigFlags& flags) {
    const grnn::RunConfig config = flags.finish();
    std::cout << "training " << grnn::cell_name(config.cell) << " n=" << config.hidden_size()
              << " seq=" << grnn::sequence_mode_name(config.sequence)
              << " lr=" << config.learning_rate
              << " optimizer=" << grnn::optimizer_name(config.optimizer)
              << " batch=" << config.batch_size << " epochs=" << config.epoch_count()
              << " seed=" << config.seed << std::endl;
    grnn::run_train(config, [](const grnn::EpochMetrics& m) {
        std::cout << "epoch " << std::setw(3) << m.epoch << "  loss " << std::fixed
                  << std::setprecision(4) << m.train_loss << "  train_acc " << m.train_accuracy
                  << "  test_acc " << m.test_accuracy << "  " << std::setprecision(1)
                  << m.seconds << "s" << std::defaultfloat << std::endl;
    });
    return kOk;
}

int run_eval_command(const ConfigFlags& flags) {
    const grnn::RunConfig config = flags.finish();
    if (config.checkpoint_path.empty()) {
        std::cerr << "eval: --checkpoint is required\n";
        return kUsage;
    }
    const double acc = grnn::run_eval(config.checkpoint_path, config);
    std::cout << "test_acc " << std::setprecision(17) << acc << '\n';
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gated recurrent network trainer (sRNN, LSTM, GRU, MGU, MGU1-3)"};
    app.require_subcommand(1);

    ConfigFlags train_flags;
    CLI::App* train = app.add_subcommand("train", "Train a sequence classifier");
    train_flags.add_model_flags(*train);
    train_flags.add_train_flags(*train);
    train->add_option("--checkpoint", train_flags.config.checkpoint_path,
                      "Write the final parameters here");

    ConfigFlags eval_flags;
    CLI::App* eval = app.add_subcommand("eval", "Test accuracy of a checkpoint");
    eval_flags.add_model_flags(*eval);
    eval->add_option("--checkpoint", eval_flags.config.checkpoint_path, "Checkpoint to load")
        ->required();

    grnn::GradCheckOptions grad_options;
    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "Finite-difference check of BPTT for every cell");
    gradcheck->add_option("--seed", grad_options.seed, "Random seed");
    gradcheck->add_option("--instances", grad_options.instances, "Instances per cell");

    std::size_t pc_hidden = 0;
    std::size_t pc_input = 0;
    std::size_t pc_classes = 0;
    CLI::App* paramcount = app.add_subcommand(
        "paramcount", "Parameter counts per cell (MNIST and Reuters settings by default)");
    paramcount->add_option("--hidden", pc_hidden, "Hidden units n");
    paramcount->add_option("--input", pc_input, "Input dimension m");
    paramcount->add_option("--classes", pc_classes, "Also count a k-way readout layer");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*train) return run_train_command(train_flags);
        if (*eval) return run_eval_command(eval_flags);
        if (*gradcheck) {
            const grnn::GradCheckReport report = grnn::run_gradcheck(grad_options);
            grnn::print_gradcheck_report(std::cout, report);
            return report.passed() ? kOk : kGradcheckFailed;
        }
        if (*paramcount) {
            const std::optional<std::size_t> k =
                pc_classes > 0 ? std::optional<std::size_t>(pc_classes) : std::nullopt;
            if (pc_hidden == 0 && pc_input == 0) {
                const std::pair<std::size_t, std::size_t> settings[] = {{50, 28}, {100, 1},
                                                                        {250, 1}};
                for (auto [n, m] : settings) {
                    grnn::print_paramcount(std::cout, n, m, grnn::run_paramcount(n, m, k));
                }
                return kOk;
            }
            if (pc_hidden == 0 || pc_input == 0) {
                std::cerr << "paramcount: give both --hidden and --input\n";
                return kUsage;
            }
            grnn::print_paramcount(std::cout, pc_hidden, pc_input,
                                   grnn::run_paramcount(pc_hidden, pc_input, k));
            return kOk;
        }
    } catch (const grnn::DivergenceError& e) {
        std::cerr << "diverged: " << e.what() << '\n';
        return kDivergence;
    } catch (const grnn::InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const grnn::Error& e) {
        // IO, format, dimension and remaining numeric errors.
        std::cerr << "error: " << e.what() << '\n';
        const bool numeric = dynamic_cast<const grnn::NumericError*>(&e) != nullptr;
        return numeric ? kDivergence : kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    }
    return kUsage;
}
