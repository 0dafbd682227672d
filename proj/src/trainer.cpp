#include "maflow/trainer.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "maflow/binary_io.hpp"
#include "maflow/errors.hpp"

namespace maflow {

void adam_update(AdamState& state, Vector& params, const Vector& grad, const AdamConfig& config) {
    if (grad.size() != params.size()) throw ShapeError("gradient and parameters differ in length");
    if (state.m.size() != params.size()) {
        state.m = Vector::Zero(params.size());
        state.v = Vector::Zero(params.size());
        state.t = 0;
    }
    ++state.t;
    state.m = config.beta1 * state.m + (1.0 - config.beta1) * grad;
    state.v = config.beta2 * state.v + (1.0 - config.beta2) * grad.cwiseAbs2();
    const double bc1 = 1.0 - std::pow(config.beta1, double(state.t));
    const double bc2 = 1.0 - std::pow(config.beta2, double(state.t));
    params.array() -= config.learning_rate * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + config.eps);
}

double clip_global_norm(Vector& grad, double max_norm) {
    const double norm = grad.norm();
    if (norm > max_norm) grad *= max_norm / norm;
    return norm;
}

Rng Checkpoint::rng() const {
    Rng rng;
    std::istringstream in(rng_state);
    in >> rng;
    if (!in) throw FormatError("checkpoint rng state is malformed");
    return rng;
}

void Checkpoint::set_rng(const Rng& rng) {
    std::ostringstream out;
    out << rng;
    rng_state = out.str();
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
    out.write("MAFLOW01", 8);
    binary::write_u32(out, kCheckpointVersion);
    binary::write_string(out, ckpt.config_json);
    binary::write_u64(out, ckpt.epoch);
    binary::write_u64(out, ckpt.step);
    write_params(out, ckpt.params);
    binary::write_u64(out, ckpt.adam.t);
    binary::write_u64(out, std::uint64_t(ckpt.adam.m.size()));
    for (Eigen::Index i = 0; i < ckpt.adam.m.size(); ++i) binary::write_f64(out, ckpt.adam.m[i]);
    for (Eigen::Index i = 0; i < ckpt.adam.v.size(); ++i) binary::write_f64(out, ckpt.adam.v[i]);
    binary::write_string(out, ckpt.rng_state);
}

Checkpoint read_checkpoint(std::istream& in) {
    char magic[8];
    binary::read_exact(in, magic, 8, "checkpoint magic");
    if (std::memcmp(magic, "MAFLOW01", 8) != 0) throw FormatError("not a checkpoint (magic mismatch at byte offset 0)");
    const auto version = binary::read_u32(in, "checkpoint version");
    if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    ckpt.config_json = binary::read_string(in, "checkpoint config");
    ckpt.epoch = binary::read_u64(in, "checkpoint epoch");
    ckpt.step = binary::read_u64(in, "checkpoint step");
    ckpt.params = read_params(in);
    ckpt.adam.t = binary::read_u64(in, "adam step");
    const auto n = binary::read_u64(in, "adam size");
    if (n != 0 && n != std::uint64_t(ckpt.params.size())) throw FormatError("adam moments do not match params");
    ckpt.adam.m.resize(Eigen::Index(n));
    ckpt.adam.v.resize(Eigen::Index(n));
    for (Eigen::Index i = 0; i < ckpt.adam.m.size(); ++i) ckpt.adam.m[i] = binary::read_f64(in, "adam m");
    for (Eigen::Index i = 0; i < ckpt.adam.v.size(); ++i) ckpt.adam.v[i] = binary::read_f64(in, "adam v");
    ckpt.rng_state = binary::read_string(in, "rng state");
    return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot write " + tmp);
        write_checkpoint(out, ckpt);
        if (!out) throw FormatError("failed writing " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint " + path);
    return read_checkpoint(in);
}

Checkpoint initial_checkpoint(const RunConfig& config, Eigen::Index dim) {
    config.validate();
    Rng rng(config.seed);
    Checkpoint ckpt;
    ckpt.config_json = config.dump();
    ckpt.params = init_params(Eigen::Index(config.hidden), dim, rng);
    if (config.init == "zero-output") ckpt.params.a.setZero();
    ckpt.set_rng(rng);
    return ckpt;
}

Model::Model(const PotentialParams& params, const RunConfig& config)
    : Model(params, config.symmetry_group, config.symmetry_mode, config.ising_L) {}

Model::Model(const PotentialParams& params, const std::string& group, SymmetryMode mode, int lattice_side) {
    if (group == "none") {
        field_ = std::make_unique<NetworkField>(params);
        return;
    }
    group_ = make_group(group, params.dim(), lattice_side);
    field_ = std::make_unique<SymmetrizedField>(params, group_, mode);
}

DensityTask::DensityTask(Dataset data, const IntegratorConfig& integrator, std::size_t batch, double logit_lambda)
    : data_(std::move(data)), integrator_(integrator), batch_(batch), lambda_(logit_lambda) {
    if (data_.size() < 1) throw ShapeError("training dataset is empty");
    if (batch_ < 1) throw ConfigError("batch size must be positive");
}

std::size_t DensityTask::steps_per_epoch() const {
    return (std::size_t(data_.size()) + batch_ - 1) / batch_;
}

void DensityTask::begin_epoch(Rng& rng) {
    if (data_.space == Space::raw) {
        // Image bytes: fresh jitter every epoch.
        current_ = logit_transform(dequantize(data_, rng), lambda_).data.X;
    } else if (current_.size() == 0) {
        current_ = data_.X;
    }
    order_ = shuffled_indices(std::size_t(data_.size()), rng);
}

LossResult DensityTask::loss(const VelocityField& field, std::size_t step_in_epoch, Rng& rng, bool with_grad) {
    const std::size_t begin = step_in_epoch * batch_;
    const std::size_t end = std::min(begin + batch_, order_.size());
    if (begin >= end) throw Error("minibatch index past the end of the epoch");
    return nll_loss(field, gather_columns(current_, order_, begin, end), integrator_, &rng, with_grad);
}

VariationalTask::VariationalTask(std::shared_ptr<const Energy> energy, const IntegratorConfig& integrator,
                                 std::size_t batch, std::size_t steps_per_epoch)
    : energy_(std::move(energy)), integrator_(integrator), batch_(batch), steps_per_epoch_(steps_per_epoch) {}

LossResult VariationalTask::loss(const VelocityField& field, std::size_t, Rng& rng, bool with_grad) {
    return variational_loss(field, *energy_, batch_, integrator_, rng, with_grad);
}

double scheduled_learning_rate(double base, const std::string& schedule, std::uint64_t step, std::uint64_t total) {
    if (schedule == "constant") return base;
    if (schedule != "cosine") throw ConfigError("unknown learning-rate schedule '" + schedule + "'");
    if (total == 0 || step >= total) return 0.0;
    return 0.5 * base * (1.0 + std::cos(std::numbers::pi * double(step) / double(total)));
}

Checkpoint train(const RunConfig& config, Checkpoint ckpt, TrainingTask& task, const TrainHooks& hooks) {
    config.validate();
    if (ckpt.params.dim() != task.dim()) {
        throw ShapeError("checkpoint dimension " + std::to_string(ckpt.params.dim()) + " differs from task dimension " +
                         std::to_string(task.dim()));
    }
    const auto start = std::chrono::steady_clock::now();
    AdamConfig adam{config.learning_rate, config.beta1, config.beta2, config.adam_eps};
    const std::uint64_t total_steps = std::uint64_t(config.epochs) * task.steps_per_epoch();
    Rng rng = ckpt.rng();
    const Model model(ckpt.params, config);

    while (ckpt.epoch < config.epochs) {
        task.begin_epoch(rng);
        for (std::size_t s = 0; s < task.steps_per_epoch(); ++s) {
            LossResult res = task.loss(model.field(), s, rng, true);
            Vector grad = res.grad.to_vector();
            if (!std::isfinite(res.value) || !grad.allFinite()) {
                throw NumericError("non-finite loss or gradient at epoch " + std::to_string(ckpt.epoch) + ", step " +
                                   std::to_string(ckpt.step));
            }
            StepMetrics m;
            m.epoch = ckpt.epoch;
            m.step = ckpt.step;
            m.loss = res.value;
            m.std_error = res.std_error;
            m.grad_norm = clip_global_norm(grad, config.clip_norm);

            Vector flat = ckpt.params.to_vector();
            adam.learning_rate =
                scheduled_learning_rate(config.learning_rate, config.lr_schedule, ckpt.step, total_steps);
            adam_update(ckpt.adam, flat, grad, adam);
            ckpt.params.assign(flat);
            ++ckpt.step;

            m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            if (hooks.on_step) hooks.on_step(m);
        }
        ++ckpt.epoch;
        ckpt.set_rng(rng);
        if (hooks.on_checkpoint && (ckpt.epoch % config.checkpoint_every == 0 || ckpt.epoch == config.epochs)) {
            hooks.on_checkpoint(ckpt);
        }
    }
    ckpt.set_rng(rng);
    return ckpt;
}

std::unique_ptr<TrainingTask> make_task(const RunConfig& config, std::shared_ptr<const IsingSpec>* spec_out) {
    const IntegratorConfig integrator = config.integrator();
    if (config.objective == Objective::variational) {
        auto spec = std::make_shared<const IsingSpec>(ising_spec(config.ising_L, config.ising_beta));
        if (spec_out != nullptr) *spec_out = spec;
        // The energy keeps a reference to the spec; share ownership through
        // an aliasing holder.
        struct Holder {
            std::shared_ptr<const IsingSpec> spec;
            IsingEnergy energy;
        };
        auto holder = std::make_shared<Holder>(Holder{spec, IsingEnergy(*spec)});
        std::shared_ptr<const Energy> energy(holder, &holder->energy);
        return std::make_unique<VariationalTask>(energy, integrator, config.batch, config.steps_per_epoch);
    }

    Dataset data;
    if (config.dataset_name == "mnist") {
        data = load_idx(config.dataset_path).images;
    } else if (config.dataset_name == "csv") {
        data = Dataset{read_csv(config.dataset_path), Space::logit};
    } else {
        Rng data_rng(config.seed ^ 0xd1b54a32d192ed03ull);
        data = toy_density(config.dataset_name, config.dataset_size, data_rng);
    }
    if (config.dataset_limit > 0 && Eigen::Index(config.dataset_limit) < data.size()) {
        data.X = data.X.leftCols(Eigen::Index(config.dataset_limit)).eval();
    }
    const double lambda = config.dataset_name == "mnist" ? config.dataset_lambda : 0.0;
    return std::make_unique<DensityTask>(std::move(data), integrator, config.batch, lambda);
}

MetricsCsv::MetricsCsv(const std::string& path) : path_(path) {
    if (!std::filesystem::exists(path_) || std::filesystem::file_size(path_) == 0) {
        std::ofstream out(path_);
        if (!out) throw FormatError("cannot write metrics file " + path_);
        out << "epoch,step,loss,grad_norm,seconds\n";
    }
}

void MetricsCsv::append(const StepMetrics& m) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw FormatError("cannot append to metrics file " + path_);
    char buf[64];
    auto num = [&buf](double v) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, end);
    };
    out << m.epoch << ',' << m.step << ',' << num(m.loss) << ',' << num(m.grad_norm) << ',' << num(m.seconds) << '\n';
}

}  // namespace maflow
