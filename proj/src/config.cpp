#include "maflow/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "maflow/errors.hpp"
#include "maflow/targets.hpp"

namespace maflow {

namespace {

using nlohmann::json;

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + std::size_t(std::count(text.begin(), text.begin() + std::ptrdiff_t(offset), '\n'));
}

// Best-effort line of the first occurrence of "key" in the raw text.
std::size_t line_of_key(const std::string& text, const std::string& key) {
    const auto pos = text.find("\"" + key + "\"");
    return pos == std::string::npos ? 0 : line_of_offset(text, pos);
}

[[noreturn]] void fail(const std::string& text, const std::string& path, const std::string& key,
                       const std::string& what) {
    const auto line = line_of_key(text, key);
    throw ConfigError("config key '" + path + "'" + (line ? " (line " + std::to_string(line) + ")" : "") + ": " +
                      what);
}

class Reader {
public:
    Reader(const std::string& text, const json& node, std::string prefix, std::set<std::string> allowed)
        : text_(text), node_(node), prefix_(std::move(prefix)) {
        if (!node_.is_object()) fail(text_, prefix_, prefix_, "expected an object");
        for (const auto& [key, _] : node_.items()) {
            if (!allowed.count(key)) fail(text_, qualified(key), key, "unknown key");
        }
    }

    template <class T>
    void get(const std::string& key, T& out) const {
        if (!node_.contains(key)) return;
        const json& v = node_.at(key);
        try {
            if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
                if (!v.is_number_unsigned()) fail(text_, qualified(key), key, "expected a non-negative integer");
            } else if constexpr (std::is_same_v<T, int>) {
                if (!v.is_number_integer()) fail(text_, qualified(key), key, "expected an integer");
            } else if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) fail(text_, qualified(key), key, "expected a number");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) fail(text_, qualified(key), key, "expected a string");
            }
            out = v.get<T>();
        } catch (const json::exception& e) {
            fail(text_, qualified(key), key, e.what());
        }
    }

    template <class T, class F>
    void get_enum(const std::string& key, T& out, F&& parse) const {
        std::string s;
        if (!node_.contains(key)) return;
        get(key, s);
        try {
            out = parse(s);
        } catch (const ConfigError& e) {
            fail(text_, qualified(key), key, e.what());
        }
    }

    std::string qualified(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

private:
    const std::string& text_;
    const json& node_;
    std::string prefix_;
};

}  // namespace

std::string objective_name(Objective objective) { return objective == Objective::nll ? "nll" : "variational"; }

Objective parse_objective(const std::string& name) {
    if (name == "nll") return Objective::nll;
    if (name == "variational") return Objective::variational;
    throw ConfigError("unknown objective '" + name + "' (expected nll or variational)");
}

Resample parse_resample(const std::string& name) {
    if (name == "step") return Resample::per_step;
    if (name == "stage") return Resample::per_stage;
    if (name == "trajectory") return Resample::per_trajectory;
    throw ConfigError("unknown resample policy '" + name + "' (expected step, stage or trajectory)");
}

std::string resample_name(Resample resample) {
    switch (resample) {
        case Resample::per_step: return "step";
        case Resample::per_stage: return "stage";
        case Resample::per_trajectory: return "trajectory";
    }
    return "step";
}

SymmetryMode parse_symmetry_mode(const std::string& name) {
    if (name == "sampled") return SymmetryMode::sampled;
    if (name == "full") return SymmetryMode::full_average;
    throw ConfigError("unknown symmetry mode '" + name + "' (expected sampled or full)");
}

std::string symmetry_mode_name(SymmetryMode mode) { return mode == SymmetryMode::sampled ? "sampled" : "full"; }

RunConfig RunConfig::defaults(Objective objective) {
    RunConfig c;
    c.objective = objective;
    c.ising_beta = critical_coupling();
    if (objective == Objective::nll) {
        c.epsilon = 0.1;
        c.steps = 100;
        c.hidden = 1024;
        c.batch = 100;
    } else {
        c.epsilon = 0.1;
        c.steps = 50;
        c.hidden = 512;
        c.batch = 64;
        c.symmetry_group = "ising-full";
    }
    return c;
}

RunConfig RunConfig::parse(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config is not valid JSON (line " + std::to_string(line_of_offset(text, e.byte)) +
                          "): " + e.what());
    }
    Reader top(text, root, "", {"objective", "model", "flow", "train", "dataset", "ising", "symmetry", "output"});

    Objective objective = Objective::nll;
    top.get_enum("objective", objective, parse_objective);
    RunConfig c = defaults(objective);

    auto section = [&](const char* name, std::set<std::string> keys, auto&& body) {
        if (!root.contains(name)) return;
        Reader r(text, root.at(name), name, std::move(keys));
        body(r);
    };
    section("model", {"hidden", "init"}, [&](const Reader& r) {
        r.get("hidden", c.hidden);
        r.get("init", c.init);
    });
    section("flow", {"epsilon", "steps", "resample"}, [&](const Reader& r) {
        r.get("epsilon", c.epsilon);
        r.get("steps", c.steps);
        r.get_enum("resample", c.resample, parse_resample);
    });
    section("train",
            {"batch", "epochs", "steps_per_epoch", "learning_rate", "lr_schedule", "beta1", "beta2", "adam_eps", "clip_norm",
             "checkpoint_every", "seed"},
            [&](const Reader& r) {
                r.get("batch", c.batch);
                r.get("epochs", c.epochs);
                r.get("steps_per_epoch", c.steps_per_epoch);
                r.get("learning_rate", c.learning_rate);
                r.get("lr_schedule", c.lr_schedule);
                r.get("beta1", c.beta1);
                r.get("beta2", c.beta2);
                r.get("adam_eps", c.adam_eps);
                r.get("clip_norm", c.clip_norm);
                r.get("checkpoint_every", c.checkpoint_every);
                r.get("seed", c.seed);
            });
    section("dataset", {"name", "path", "lambda", "size", "limit"}, [&](const Reader& r) {
        r.get("name", c.dataset_name);
        r.get("path", c.dataset_path);
        r.get("lambda", c.dataset_lambda);
        r.get("size", c.dataset_size);
        r.get("limit", c.dataset_limit);
    });
    section("ising", {"L", "beta"}, [&](const Reader& r) {
        r.get("L", c.ising_L);
        r.get("beta", c.ising_beta);
    });
    section("symmetry", {"group", "mode"}, [&](const Reader& r) {
        r.get("group", c.symmetry_group);
        r.get_enum("mode", c.symmetry_mode, parse_symmetry_mode);
    });
    section("output", {"dir"}, [&](const Reader& r) { r.get("dir", c.output_dir); });

    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void RunConfig::validate() const {
    if (hidden < 1) throw ConfigError("model.hidden must be at least 1");
    if (init != "uniform" && init != "zero-output") {
        throw ConfigError("model.init must be 'uniform' or 'zero-output'");
    }
    integrator().validate();
    if (batch < 1) throw ConfigError("train.batch must be at least 1");
    if (steps_per_epoch < 1) throw ConfigError("train.steps_per_epoch must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
    if (lr_schedule != "constant" && lr_schedule != "cosine") {
        throw ConfigError("train.lr_schedule must be 'constant' or 'cosine'");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("train.beta1 and train.beta2 must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps must be positive");
    if (!(clip_norm > 0.0)) throw ConfigError("train.clip_norm must be positive");
    if (checkpoint_every < 1) throw ConfigError("train.checkpoint_every must be at least 1");
    static const std::set<std::string> datasets{"mixture-of-8", "ring", "two-moons", "mnist", "csv"};
    if (objective == Objective::nll && !datasets.count(dataset_name)) {
        throw ConfigError("dataset.name '" + dataset_name + "' is unknown");
    }
    if ((dataset_name == "mnist" || dataset_name == "csv") && objective == Objective::nll && dataset_path.empty()) {
        throw ConfigError("dataset.path is required for dataset '" + dataset_name + "'");
    }
    if (!(dataset_lambda > 0.0 && dataset_lambda < 0.5)) throw ConfigError("dataset.lambda must lie in (0, 0.5)");
    if (objective == Objective::variational && (ising_L < 2 || ising_L % 2 != 0)) {
        throw ConfigError("ising.L must be even and at least 2");
    }
    if (symmetry_group != "none" && symmetry_group != "z2" && symmetry_group != "ising-full") {
        throw ConfigError("symmetry.group must be none, z2 or ising-full");
    }
}

nlohmann::json RunConfig::to_json() const {
    json j;
    j["objective"] = objective_name(objective);
    j["model"] = {{"hidden", hidden}, {"init", init}};
    j["flow"] = {{"epsilon", epsilon}, {"steps", steps}, {"resample", resample_name(resample)}};
    j["train"] = {{"batch", batch},
                  {"epochs", epochs},
                  {"steps_per_epoch", steps_per_epoch},
                  {"learning_rate", learning_rate},
                  {"lr_schedule", lr_schedule},
                  {"beta1", beta1},
                  {"beta2", beta2},
                  {"adam_eps", adam_eps},
                  {"clip_norm", clip_norm},
                  {"checkpoint_every", checkpoint_every},
                  {"seed", seed}};
    j["dataset"] = {{"name", dataset_name},
                    {"path", dataset_path},
                    {"lambda", dataset_lambda},
                    {"size", dataset_size},
                    {"limit", dataset_limit}};
    j["ising"] = {{"L", ising_L}, {"beta", ising_beta}};
    j["symmetry"] = {{"group", symmetry_group}, {"mode", symmetry_mode_name(symmetry_mode)}};
    j["output"] = {{"dir", output_dir}};
    return j;
}

std::string RunConfig::hash() const {
    json j = to_json();
    j["train"].erase("epochs");
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

IntegratorConfig RunConfig::integrator(Direction direction) const {
    IntegratorConfig ic;
    ic.epsilon = epsilon;
    ic.steps = steps;
    ic.direction = direction;
    ic.resample = resample;
    return ic;
}

}  // namespace maflow
