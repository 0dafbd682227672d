#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "maflow/flow.hpp"
#include "maflow/symmetry.hpp"

namespace maflow {

enum class Objective { nll, variational };

/// Everything a run needs, mirrored one-to-one by the JSON config file:
///
///   objective            "nll" | "variational"
///   model.hidden         hidden width h
///   model.init           "uniform" | "zero-output" (a = 0, identity flow)
///   flow.epsilon         RK4 step
///   flow.steps           number of steps d
///   flow.resample        "step" | "stage" | "trajectory"
///   train.batch, train.epochs, train.steps_per_epoch (variational only),
///   train.learning_rate, train.lr_schedule ("constant" | "cosine",
///   decaying to zero over train.epochs), train.beta1, train.beta2, train.adam_eps,
///   train.clip_norm, train.checkpoint_every, train.seed
///   dataset.name         "mixture-of-8" | "ring" | "two-moons" | "mnist" | "csv"
///   dataset.path, dataset.lambda, dataset.size (toy sample count),
///   dataset.limit (keep only the first n rows; 0 keeps all)
///   ising.L, ising.beta
///   symmetry.group       "none" | "z2" | "ising-full"
///   symmetry.mode        "sampled" | "full"
///   output.dir
///
/// Defaults for (epsilon, steps, hidden, batch) are (0.1, 100, 1024, 100)
/// for nll and (0.1, 50, 512, 64) for variational.
struct RunConfig {
    Objective objective = Objective::nll;

    std::size_t hidden = 1024;
    std::string init = "uniform";

    double epsilon = 0.1;
    std::size_t steps = 100;
    Resample resample = Resample::per_step;

    std::size_t batch = 100;
    std::size_t epochs = 10;
    std::size_t steps_per_epoch = 1;
    double learning_rate = 1e-3;
    std::string lr_schedule = "constant";
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 10.0;
    std::size_t checkpoint_every = 1;
    std::uint64_t seed = 1;

    std::string dataset_name = "mixture-of-8";
    std::string dataset_path;
    double dataset_lambda = 1e-6;
    std::size_t dataset_size = 10000;
    std::size_t dataset_limit = 0;

    int ising_L = 4;
    double ising_beta = 0.0;  // set to the critical coupling by defaults()

    std::string symmetry_group = "none";
    SymmetryMode symmetry_mode = SymmetryMode::sampled;

    std::string output_dir = "runs";

    static RunConfig defaults(Objective objective);

    /// Parses JSON text; unknown keys and type errors raise ConfigError
    /// naming the key and its line.
    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::string& path);

    void validate() const;
    nlohmann::json to_json() const;
    std::string dump() const { return to_json().dump(2); }

    /// 16 hex digits of a 64-bit FNV-1a hash of the canonical JSON without
    /// train.epochs, so extending a run keeps its file names.
    std::string hash() const;

    IntegratorConfig integrator(Direction direction = Direction::forward) const;
};

std::string objective_name(Objective objective);
Objective parse_objective(const std::string& name);
Resample parse_resample(const std::string& name);
std::string resample_name(Resample resample);
SymmetryMode parse_symmetry_mode(const std::string& name);
std::string symmetry_mode_name(SymmetryMode mode);

}  // namespace maflow
