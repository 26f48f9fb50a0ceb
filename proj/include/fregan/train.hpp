#pragma once
// Adam, the alternating D/G training loop, checkpoints and sampling.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fregan/data.hpp"
#include "fregan/losses.hpp"
#include "fregan/nets.hpp"

namespace fregan::train {

struct AdamConfig {
    float lr = 2e-4f;
    float beta1 = 0.5f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

class Adam {
public:
    Adam() = default;
    Adam(const ParamSet& params, const AdamConfig& config);

    // Parameters without a gradient buffer are treated as having zero gradient.
    void step(ParamSet& params);
    std::int64_t steps() const { return steps_; }
    const AdamConfig& config() const { return config_; }

    std::vector<std::vector<float>>& first_moments() { return m_; }
    std::vector<std::vector<float>>& second_moments() { return v_; }
    const std::vector<std::vector<float>>& first_moments() const { return m_; }
    const std::vector<std::vector<float>>& second_moments() const { return v_; }
    void set_steps(std::int64_t steps) { steps_ = steps; }

private:
    AdamConfig config_;
    std::int64_t steps_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

struct TrainConfig {
    std::uint64_t seed = 0;
    int batch = 8;
    std::int64_t iterations = 2000;
    AdamConfig adam;
    gan::Ablation ablation;
    float hfd_g_sign = gan::kDefaultHfdGeneratorSign;
    data::DatasetSpec dataset;
    nets::ModelWidths widths;
    std::filesystem::path out_dir;  // empty: keep everything in memory
    std::int64_t log_interval = 1;
    std::int64_t checkpoint_interval = 0;  // 0: only after the last step
};

// Throws std::invalid_argument naming the offending field.
void validate(const TrainConfig& config);
std::string to_json(const TrainConfig& config);
TrainConfig config_from_json(const std::string& text);

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& term, std::int64_t iteration, float value);
    const std::string& term() const { return term_; }
    std::int64_t iteration() const { return iteration_; }

private:
    std::string term_;
    std::int64_t iteration_;
};

// Model, optimizers and progress; everything a checkpoint stores.
struct TrainState {
    explicit TrainState(const TrainConfig& config);
    TrainConfig config;
    nets::Model model;
    ParamSet d_params;  // discriminator + HFD heads
    ParamSet g_params;
    Adam adam_d;
    Adam adam_g;
    std::int64_t iteration = 0;  // completed steps
};

// Seeds of the latent draws for one iteration.
std::uint64_t d_latent_seed(std::uint64_t seed, std::int64_t iteration);
std::uint64_t g_latent_seed(std::uint64_t seed, std::int64_t iteration);
std::uint64_t batch_seed(std::uint64_t seed);

// Observation points inside one step, for gradient-flow checks.
struct StepHooks {
    std::function<void(const TrainState&)> after_d_backward;
    std::function<void(const TrainState&)> after_g_backward;
};

// Runs one D update then one G update on `real`; advances state.iteration.
gan::LossReport train_step(TrainState& state, const Tensor& real, const StepHooks* hooks = nullptr);

// Checkpoint file: "FREGANv1", entry table, raw little-endian arrays.
enum class DType : std::uint8_t { f32 = 0, u8 = 1 };

struct CheckpointEntry {
    std::string name;
    DType dtype = DType::f32;
    std::vector<std::int64_t> shape;
    std::vector<std::uint8_t> bytes;  // little-endian payload
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode_checkpoint(const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> decode_checkpoint(const std::vector<std::uint8_t>& file, const std::string& origin = "buffer");
// Temp file then rename.
void write_checkpoint_file(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint_file(const std::filesystem::path& path);

CheckpointEntry f32_entry(const std::string& name, const std::vector<std::int64_t>& shape, const float* values);
std::vector<float> f32_values(const CheckpointEntry& entry);

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

class Trainer {
public:
    explicit Trainer(const TrainConfig& config);
    explicit Trainer(TrainState state);
    Trainer(const Trainer&) = delete;
    Trainer& operator=(const Trainer&) = delete;

    gan::LossReport step();
    TrainState& state() { return state_; }
    const TrainState& state() const { return state_; }
    const data::ImageSet& dataset() const { return dataset_; }

private:
    TrainState state_;
    data::ImageSet dataset_;
    data::BatchIterator batches_;
};

struct LoopResult {
    std::vector<gan::LossReport> logged;  // one per log interval
    std::vector<std::int64_t> logged_iterations;
    std::filesystem::path checkpoint;
};

inline constexpr const char* kLogHeader = "iteration,l_d,l_g,l_d_hf,l_g_hf,l_align,l_recons";
inline constexpr const char* kCheckpointName = "checkpoint.fgc";
inline constexpr const char* kLogName = "log.csv";

// Fresh run from config, or continuation of `resume` up to config.iterations.
LoopResult train_loop(const TrainConfig& config, const std::optional<std::filesystem::path>& resume = std::nullopt);
std::string format_log_row(std::int64_t iteration, const gan::LossReport& report);

// Generated images are produced in fixed chunks so image i depends only on (seed, i).
inline constexpr int kSampleChunk = 16;
Tensor generate(const nets::Generator& g, bool fsc_enabled, int n, std::uint64_t seed);
// Writes sample_00000.png ... ; returns the written paths.
std::vector<std::filesystem::path> sample(const std::filesystem::path& checkpoint, int n, std::uint64_t seed,
                                          const std::filesystem::path& out_dir);

}  // namespace fregan::train
