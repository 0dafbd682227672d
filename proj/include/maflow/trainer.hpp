#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include "maflow/config.hpp"
#include "maflow/data.hpp"
#include "maflow/symmetry.hpp"
#include "maflow/targets.hpp"

namespace maflow {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Vector m;
    Vector v;
    std::uint64_t t = 0;
};

/// One bias-corrected adaptive-moment step, in place on params and state.
void adam_update(AdamState& state, Vector& params, const Vector& grad, const AdamConfig& config);

/// Rescales grad to the given global norm if it is longer; returns the
/// norm before clipping.
double clip_global_norm(Vector& grad, double max_norm);

/// Learning rate for optimizer step `step` (0-based) of `total`. The cosine
/// schedule falls from the base rate to zero at step `total`.
double scheduled_learning_rate(double base, const std::string& schedule, std::uint64_t step, std::uint64_t total);

struct Checkpoint {
    std::string config_json;  // RunConfig snapshot, stored verbatim
    PotentialParams params;
    AdamState adam;
    std::uint64_t epoch = 0;
    std::uint64_t step = 0;
    std::string rng_state;  // std::mt19937_64 textual state

    RunConfig config() const { return RunConfig::parse(config_json); }
    Rng rng() const;
    void set_rng(const Rng& rng);
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Container: "MAFLOW01", u32 version, length-prefixed config JSON, then the
/// counters, the params section, Adam moments and the rng state.
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
/// Writes to path + ".tmp" and renames, so an existing file is only ever
/// replaced by a complete one.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Fresh parameters for the config (drawn from a stream seeded with
/// train.seed, which then continues into training).
Checkpoint initial_checkpoint(const RunConfig& config, Eigen::Index dim);

/// The velocity field a config prescribes for given params: the bare network
/// or its symmetrized form.
class Model {
public:
    Model(const PotentialParams& params, const RunConfig& config);
    Model(const PotentialParams& params, const std::string& group, SymmetryMode mode, int lattice_side);
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    const VelocityField& field() const { return *field_; }
    const SymmetryGroup& group() const { return group_; }

private:
    SymmetryGroup group_;
    std::unique_ptr<VelocityField> field_;
};

/// Supplies minibatch losses to the optimizer.
class TrainingTask {
public:
    virtual ~TrainingTask() = default;
    virtual Eigen::Index dim() const = 0;
    virtual std::size_t steps_per_epoch() const = 0;
    /// Called once at the start of every epoch, before any step.
    virtual void begin_epoch(Rng& rng) = 0;
    virtual LossResult loss(const VelocityField& field, std::size_t step_in_epoch, Rng& rng, bool with_grad) = 0;
};

/// Maximum likelihood. Data tagged Space::raw (image bytes) is dequantized and
/// logit-transformed afresh every epoch; anything else is used as given.
class DensityTask final : public TrainingTask {
public:
    DensityTask(Dataset data, const IntegratorConfig& integrator, std::size_t batch, double logit_lambda = kLogitPadding);

    Eigen::Index dim() const override { return data_.dim(); }
    std::size_t steps_per_epoch() const override;
    void begin_epoch(Rng& rng) override;
    LossResult loss(const VelocityField& field, std::size_t step_in_epoch, Rng& rng, bool with_grad) override;

private:
    Dataset data_;
    Matrix current_;
    std::vector<std::size_t> order_;
    IntegratorConfig integrator_;
    std::size_t batch_;
    double lambda_;
};

/// Reverse-KL training against exp(-E).
class VariationalTask final : public TrainingTask {
public:
    VariationalTask(std::shared_ptr<const Energy> energy, const IntegratorConfig& integrator, std::size_t batch,
                    std::size_t steps_per_epoch);

    Eigen::Index dim() const override { return energy_->dim(); }
    std::size_t steps_per_epoch() const override { return steps_per_epoch_; }
    void begin_epoch(Rng&) override {}
    LossResult loss(const VelocityField& field, std::size_t step_in_epoch, Rng& rng, bool with_grad) override;

private:
    std::shared_ptr<const Energy> energy_;
    IntegratorConfig integrator_;
    std::size_t batch_;
    std::size_t steps_per_epoch_;
};

struct StepMetrics {
    std::uint64_t epoch = 0;
    std::uint64_t step = 0;
    double loss = 0.0;
    double std_error = 0.0;
    double grad_norm = 0.0;  // before clipping
    double seconds = 0.0;    // wall time since train() was entered
};

struct TrainHooks {
    std::function<void(const StepMetrics&)> on_step;
    /// Called after every checkpoint_every epochs and once at the end.
    std::function<void(const Checkpoint&)> on_checkpoint;
};

/// Runs epochs [ckpt.epoch, config.epochs). A non-finite loss or gradient
/// raises NumericError before the parameters are touched.
Checkpoint train(const RunConfig& config, Checkpoint ckpt, TrainingTask& task, const TrainHooks& hooks = {});

/// Builds the task the config describes (dataset loading included).
std::unique_ptr<TrainingTask> make_task(const RunConfig& config, std::shared_ptr<const IsingSpec>* spec_out = nullptr);

/// Appends rows "epoch,step,loss,grad_norm,seconds", writing the header when
/// the file is new.
class MetricsCsv {
public:
    explicit MetricsCsv(const std::string& path);
    void append(const StepMetrics& m);

private:
    std::string path_;
};

}  // namespace maflow
