// maflow: train, sample and evaluate Monge-Ampere flows from the command line.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "maflow/allocator.hpp"
#include "maflow/config.hpp"
#include "maflow/data.hpp"
#include "maflow/diagnostics.hpp"
#include "maflow/errors.hpp"
#include "maflow/trainer.hpp"

namespace fs = std::filesystem;
using namespace maflow;

namespace {

constexpr int kExitFailedCheck = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitFormat = 4;

std::string stem_path(const std::string& out, const std::string& suffix) {
    fs::path p(out);
    const std::string ext = p.has_extension() ? p.extension().string() : ".csv";
    return (p.parent_path() / (p.stem().string() + suffix + ext)).string();
}

std::vector<std::string> coordinate_header(Eigen::Index dim, const std::string& extra = "") {
    std::vector<std::string> h;
    for (Eigen::Index i = 0; i < dim; ++i) h.push_back("x" + std::to_string(i));
    if (!extra.empty()) h.push_back(extra);
    return h;
}

// Integrator settings of a checkpoint with optional command-line overrides.
struct FlowOverrides {
    std::optional<double> epsilon;
    std::optional<std::size_t> steps;
    std::optional<std::string> symmetry_mode;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--epsilon", epsilon, "RK4 step size (default: from checkpoint)");
        cmd->add_option("--steps", steps, "number of RK4 steps (default: from checkpoint)");
        cmd->add_option("--symmetry-mode", symmetry_mode, "sampled or full (default: from checkpoint)");
    }
    void apply(RunConfig& c) const {
        if (epsilon) c.epsilon = *epsilon;
        if (steps) c.steps = *steps;
        if (symmetry_mode) c.symmetry_mode = parse_symmetry_mode(*symmetry_mode);
        c.validate();
    }
};

struct TrainArgs {
    std::string config;
    std::string resume;
    std::optional<std::string> objective;
    std::optional<int> ising_L;
    std::optional<std::size_t> epochs;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
};

int run_train(const TrainArgs& a) {
    std::optional<Checkpoint> resumed;
    if (!a.resume.empty()) resumed = load_checkpoint(a.resume);

    RunConfig config;
    if (!a.config.empty()) {
        config = RunConfig::load(a.config);
    } else if (resumed) {
        config = resumed->config();
    } else {
        config = RunConfig::defaults(a.objective ? parse_objective(*a.objective) : Objective::nll);
    }
    if (a.objective) config.objective = parse_objective(*a.objective);
    if (a.ising_L) config.ising_L = *a.ising_L;
    if (a.epochs) config.epochs = *a.epochs;
    if (a.seed) config.seed = *a.seed;
    if (a.out_dir) config.output_dir = *a.out_dir;
    config.validate();

    std::shared_ptr<const IsingSpec> spec;
    auto task = make_task(config, &spec);
    Checkpoint ckpt = resumed ? *resumed : initial_checkpoint(config, task->dim());
    if (resumed && std::size_t(ckpt.params.hidden()) != config.hidden) {
        throw ShapeError("checkpoint hidden width " + std::to_string(ckpt.params.hidden()) +
                         " differs from config model.hidden " + std::to_string(config.hidden));
    }
    ckpt.config_json = config.dump();

    fs::create_directories(config.output_dir);
    const std::string hash = config.hash();
    const std::string metrics_path = (fs::path(config.output_dir) / ("metrics-" + hash + ".csv")).string();
    const std::string ckpt_path = (fs::path(config.output_dir) / ("checkpoint-" + hash + ".bin")).string();
    MetricsCsv metrics(metrics_path);

    std::optional<double> bound;
    if (spec && spec->L <= kMaxEnumerationSide) bound = exact_neg_log_z(*spec);
    if (bound) std::printf("exact -ln Z = %.10f\n", *bound);

    double epoch_sum = 0.0;
    std::size_t epoch_count = 0;
    TrainHooks hooks;
    hooks.on_step = [&](const StepMetrics& m) {
        metrics.append(m);
        epoch_sum += m.loss;
        ++epoch_count;
    };
    hooks.on_checkpoint = [&](const Checkpoint& c) {
        save_checkpoint(ckpt_path, c);
        std::printf("epoch %llu  step %llu  mean loss %.6f\n", static_cast<unsigned long long>(c.epoch),
                    static_cast<unsigned long long>(c.step), epoch_count ? epoch_sum / double(epoch_count) : 0.0);
        std::fflush(stdout);
        epoch_sum = 0.0;
        epoch_count = 0;
    };
    if (ckpt.epoch >= config.epochs) save_checkpoint(ckpt_path, ckpt);
    try {
        train(config, std::move(ckpt), *task, hooks);
    } catch (const NumericError&) {
        std::fprintf(stderr, "training aborted; last good checkpoint kept at %s\n", ckpt_path.c_str());
        throw;
    }
    std::printf("checkpoint %s\nmetrics %s\n", ckpt_path.c_str(), metrics_path.c_str());
    return 0;
}

struct SampleArgs {
    std::string ckpt;
    std::size_t n = 1000;
    std::string out;
    std::size_t dump_every = 0;
    bool spins = false;
    std::string logp_out;
    std::uint64_t seed = 1;
    FlowOverrides flow;
};

int run_sample(const SampleArgs& a) {
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    RunConfig config = ckpt.config();
    a.flow.apply(config);
    const Model model(ckpt.params, config);
    if (a.n < 1) throw ConfigError("--n must be at least 1");
    std::unique_ptr<IsingSpec> spec;
    if (a.spins) {
        if (config.objective != Objective::variational) throw ConfigError("--spins needs an Ising checkpoint");
        if (Eigen::Index(config.ising_L) * config.ising_L != ckpt.params.dim()) {
            throw ShapeError("checkpoint dimension does not match the Ising lattice");
        }
    }

    Rng rng(a.seed);
    StepObserver observer;
    if (a.dump_every > 0) {
        observer = [&](std::size_t step, const FlowState& s) {
            if (step % a.dump_every == 0 || step == config.steps) {
                write_csv(stem_path(a.out, "-frame-" + std::to_string(step)), s.X, coordinate_header(s.X.rows()));
            }
        };
    }
    const FlowState out = sample(model.field(), a.n, config.integrator(), rng, nullptr, observer);
    write_csv(a.out, out.X, coordinate_header(out.X.rows()));
    if (!a.logp_out.empty()) write_csv(a.logp_out, out.L.transpose(), {"log_prob"});
    if (a.spins) {
        Matrix s(out.X.rows(), out.X.cols());
        for (Eigen::Index j = 0; j < out.X.cols(); ++j) s.col(j) = spin_sampler(out.X.col(j), rng).cast<double>();
        write_csv(stem_path(a.out, "-spins"), s, coordinate_header(s.rows()));
    }
    return 0;
}

// Data in model space: CSV as is, IDX images dequantized and logit-transformed.
Matrix load_model_space(const std::string& path, const RunConfig& config, Rng& rng) {
    if (is_idx_file(path)) {
        const auto raw = load_idx(path).images;
        return logit_transform(dequantize(raw, rng), config.dataset_lambda).data.X;
    }
    return read_csv(path);
}

struct LogProbArgs {
    std::string ckpt;
    std::string data;
    std::string out;
    std::uint64_t seed = 1;
    std::size_t chunk = 256;
    FlowOverrides flow;
};

int run_logprob(const LogProbArgs& a) {
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    RunConfig config = ckpt.config();
    a.flow.apply(config);
    const Model model(ckpt.params, config);
    Rng rng(a.seed);
    const Matrix X = load_model_space(a.data, config, rng);
    if (X.rows() != ckpt.params.dim()) {
        throw ShapeError("data has dimension " + std::to_string(X.rows()) + ", checkpoint expects " +
                         std::to_string(ckpt.params.dim()));
    }
    Vector lp(X.cols());
    const auto chunk = Eigen::Index(std::max<std::size_t>(a.chunk, 1));
    for (Eigen::Index j = 0; j < X.cols(); j += chunk) {
        const auto n = std::min(chunk, X.cols() - j);
        lp.segment(j, n) = log_prob(model.field(), X.middleCols(j, n), config.integrator(), &rng).log_prob;
    }
    write_csv(a.out, lp.transpose(), {"log_prob"});
    std::printf("NLL %.10f\n", -lp.mean());
    return 0;
}

struct FlowArgs {
    std::string ckpt;
    std::string data;
    std::string out;
    std::string direction = "forward";
    std::size_t dump_every = 0;
    std::uint64_t seed = 1;
    FlowOverrides flow;
};

int run_flow(const FlowArgs& a) {
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    RunConfig config = ckpt.config();
    a.flow.apply(config);
    const Model model(ckpt.params, config);
    Direction dir;
    if (a.direction == "forward") {
        dir = Direction::forward;
    } else if (a.direction == "backward") {
        dir = Direction::backward;
    } else {
        throw ConfigError("--direction must be forward or backward");
    }
    Rng rng(a.seed);
    const Matrix X = read_csv(a.data);
    if (X.rows() != ckpt.params.dim()) throw ShapeError("data dimension does not match the checkpoint");
    const IntegratorConfig ic = config.integrator(dir);
    FlowState start{X, Vector::Zero(X.cols()), dir == Direction::forward ? 0.0 : ic.total_time()};
    StepObserver observer;
    if (a.dump_every > 0) {
        observer = [&](std::size_t step, const FlowState& s) {
            if (step % a.dump_every == 0 || step == ic.steps) {
                write_csv(stem_path(a.out, "-frame-" + std::to_string(step)), s.X, coordinate_header(s.X.rows()));
            }
        };
    }
    const FlowState end = integrate(model.field(), std::move(start), ic, &rng, nullptr, observer);
    Matrix table(end.X.rows() + 1, end.X.cols());
    table.topRows(end.X.rows()) = end.X;
    table.bottomRows(1) = end.L.transpose();
    write_csv(a.out, table, coordinate_header(end.X.rows(), "delta_log_density"));
    return 0;
}

int run_gaussian_demo(double lambda, double T, std::size_t steps) {
    const auto r = check_gaussian_flow(lambda, T, steps);
    const double eps = T / double(steps);
    std::printf("epsilon %.17g\nmap_error %.17g\nlog_density_error %.17g\n", eps, r.map_error, r.log_density_error);
    constexpr double kTolerance = 1e-6;
    if (eps <= 0.1 && (r.map_error > kTolerance || r.log_density_error > kTolerance)) {
        std::fprintf(stderr, "error above tolerance %g\n", kTolerance);
        return kExitFailedCheck;
    }
    return 0;
}

int run_ising_oracle(int L, double beta) {
    const auto p = exact_partition(ising_spec(L, beta));
    std::printf("alpha %.17g\nlog_det %.17g\nlog_z_ising %.17g\nneg_log_z %.17g\n", p.alpha, p.log_det,
                p.log_z_ising, p.neg_log_z);
    return 0;
}

int run_gradcheck(const GradCheckSetup& s) {
    const auto r = gradient_check(s);
    std::printf("coordinates %zu\nmax_rel_error %.3e\nworst analytic %.10e numeric %.10e\n", r.coordinates,
                r.max_rel_error, r.worst_analytic, r.worst_numeric);
    return r.max_rel_error < 1e-4 ? 0 : kExitFailedCheck;
}

}  // namespace

int main(int argc, char** argv) {
    configure_allocator();
    CLI::App app{"Monge-Ampere flow: training, sampling and density evaluation"};
    app.require_subcommand(1);
    std::function<int()> action;

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train a model from a JSON config");
    train_cmd->add_option("--config", train_args.config, "config file")->check(CLI::ExistingFile);
    train_cmd->add_option("--resume", train_args.resume, "checkpoint to continue from")->check(CLI::ExistingFile);
    train_cmd->add_option("--objective", train_args.objective, "nll or variational");
    train_cmd->add_option("--ising-L", train_args.ising_L, "Ising lattice side");
    train_cmd->add_option("--epochs", train_args.epochs, "total number of epochs");
    train_cmd->add_option("--seed", train_args.seed, "random seed");
    train_cmd->add_option("--out-dir", train_args.out_dir, "directory for metrics and checkpoints");
    train_cmd->callback([&] { action = [&] { return run_train(train_args); }; });

    SampleArgs sample_args;
    auto* sample_cmd = app.add_subcommand("sample", "draw samples from a trained model");
    sample_cmd->add_option("--ckpt", sample_args.ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
    sample_cmd->add_option("--n", sample_args.n, "number of samples")->required();
    sample_cmd->add_option("--out", sample_args.out, "output CSV")->required();
    sample_cmd->add_option("--dump-every", sample_args.dump_every, "write a frame CSV every k steps");
    sample_cmd->add_flag("--spins", sample_args.spins, "also write +-1 spin configurations (<out>-spins.csv)");
    sample_cmd->add_option("--logp-out", sample_args.logp_out, "write per-sample log-density to this CSV");
    sample_cmd->add_option("--seed", sample_args.seed, "random seed");
    sample_args.flow.add_to(sample_cmd);
    sample_cmd->callback([&] { action = [&] { return run_sample(sample_args); }; });

    LogProbArgs lp_args;
    auto* lp_cmd = app.add_subcommand("logprob", "per-row model log-density of a CSV or IDX file");
    lp_cmd->add_option("--ckpt", lp_args.ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
    lp_cmd->add_option("--data", lp_args.data, "CSV rows or IDX images")->required()->check(CLI::ExistingFile);
    lp_cmd->add_option("--out", lp_args.out, "output CSV")->required();
    lp_cmd->add_option("--seed", lp_args.seed, "random seed (dequantization, sampled symmetry)");
    lp_cmd->add_option("--chunk", lp_args.chunk, "rows integrated together");
    lp_args.flow.add_to(lp_cmd);
    lp_cmd->callback([&] { action = [&] { return run_logprob(lp_args); }; });

    FlowArgs flow_args;
    auto* flow_cmd = app.add_subcommand("flow", "push CSV points through the flow");
    flow_cmd->add_option("--ckpt", flow_args.ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
    flow_cmd->add_option("--data", flow_args.data, "input CSV")->required()->check(CLI::ExistingFile);
    flow_cmd->add_option("--out", flow_args.out, "output CSV")->required();
    flow_cmd->add_option("--direction", flow_args.direction, "forward (0 -> T) or backward (T -> 0)");
    flow_cmd->add_option("--dump-every", flow_args.dump_every, "write a frame CSV every k steps");
    flow_cmd->add_option("--seed", flow_args.seed, "random seed (sampled symmetry)");
    flow_args.flow.add_to(flow_cmd);
    flow_cmd->callback([&] { action = [&] { return run_flow(flow_args); }; });

    double demo_lambda = 0.5, demo_T = 1.0;
    std::size_t demo_steps = 10;
    auto* demo_cmd = app.add_subcommand("gaussian1d-demo", "integrator vs the exact 1-D Gaussian flow");
    demo_cmd->add_option("--lambda", demo_lambda, "potential curvature");
    demo_cmd->add_option("--T", demo_T, "total time");
    demo_cmd->add_option("--steps", demo_steps, "number of RK4 steps");
    demo_cmd->callback([&] { action = [&] { return run_gaussian_demo(demo_lambda, demo_T, demo_steps); }; });

    int oracle_L = 2;
    double oracle_beta = critical_coupling();
    auto* oracle_cmd = app.add_subcommand("ising-oracle", "exact free energy of a small Ising lattice");
    oracle_cmd->add_option("--L", oracle_L, "lattice side (even, at most 4)");
    oracle_cmd->add_option("--beta", oracle_beta, "coupling (default: critical)");
    oracle_cmd->callback([&] { action = [&] { return run_ising_oracle(oracle_L, oracle_beta); }; });

    GradCheckSetup gc;
    auto* gc_cmd = app.add_subcommand("gradcheck", "compare reverse-mode gradients with finite differences");
    gc_cmd->group("");
    gc_cmd->add_option("--objective", gc.objective, "nll or variational");
    gc_cmd->add_option("--seed", gc.seed, "random seed");
    gc_cmd->add_option("--coords", gc.coordinates, "number of parameter coordinates");
    gc_cmd->callback([&] { action = [&] { return run_gradcheck(gc); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        return action();
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return kExitNumeric;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return kExitFormat;
    } catch (const StaleTapeError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFormat;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
