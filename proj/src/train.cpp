#include "fregan/train.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "json.hpp"

#include "fregan/ops.hpp"

namespace fregan::train {

using nlohmann::json;

namespace {

constexpr std::uint64_t kLatentDStream = 0x3001;
constexpr std::uint64_t kLatentGStream = 0x3002;
constexpr std::uint64_t kBatchStream = 0x3003;
constexpr std::uint64_t kSampleStream = 0x3004;
constexpr char kMagic[8] = {'F', 'R', 'E', 'G', 'A', 'N', 'v', '1'};
constexpr int kMetaVersion = 1;

}  // namespace

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(const ParamSet& params, const AdamConfig& config) : config_(config) {
    for (const auto& e : params.entries()) {
        m_.emplace_back(e.value.numel(), 0.0f);
        v_.emplace_back(e.value.numel(), 0.0f);
    }
}

void Adam::step(ParamSet& params) {
    auto& entries = params.entries();
    if (entries.size() != m_.size()) {
        throw std::invalid_argument("Adam: optimizer tracks " + std::to_string(m_.size()) + " tensors, got " +
                                    std::to_string(entries.size()));
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].value.numel() != m_[i].size()) {
            throw std::invalid_argument("Adam: shape mismatch for " + entries[i].name);
        }
    }
    ++steps_;
    const float b1 = config_.beta1, b2 = config_.beta2;
    const float bc1 = static_cast<float>(1.0 - std::pow(static_cast<double>(b1), static_cast<double>(steps_)));
    const float bc2 = static_cast<float>(1.0 - std::pow(static_cast<double>(b2), static_cast<double>(steps_)));
    for (std::size_t i = 0; i < entries.size(); ++i) {
        Tensor& p = entries[i].value;
        auto values = p.mutable_data();
        const bool has = p.has_grad();
        std::span<const float> grad = has ? p.grad() : std::span<const float>{};
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < values.size(); ++k) {
            const float g = has ? grad[k] : 0.0f;
            m[k] = b1 * m[k] + (1.0f - b1) * g;
            v[k] = b2 * v[k] + (1.0f - b2) * (g * g);
            const float mhat = m[k] / bc1;
            const float vhat = v[k] / bc2;
            values[k] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Config

void validate(const TrainConfig& c) {
    if (c.batch < 2) throw std::invalid_argument("batch must be >= 2 (got " + std::to_string(c.batch) + ")");
    if (c.iterations < 1) throw std::invalid_argument("iterations must be >= 1 (got " + std::to_string(c.iterations) + ")");
    if (!(c.adam.lr > 0.0f) || !std::isfinite(c.adam.lr)) throw std::invalid_argument("lr must be positive");
    if (!(c.adam.beta1 >= 0.0f && c.adam.beta1 < 1.0f) || !(c.adam.beta2 >= 0.0f && c.adam.beta2 < 1.0f)) {
        throw std::invalid_argument("betas must lie in [0, 1)");
    }
    if (c.log_interval < 1) throw std::invalid_argument("log_interval must be >= 1");
    if (c.checkpoint_interval < 0) throw std::invalid_argument("checkpoint_interval must be >= 0");
    if (c.dataset.size != nets::kImageSize) {
        throw std::invalid_argument("the models are built for 64×64 images (dataset size " +
                                    std::to_string(c.dataset.size) + ")");
    }
    data::validate(c.dataset);
    if (c.dataset.kind != data::DatasetKind::directory && c.batch > c.dataset.n) {
        throw std::invalid_argument("batch " + std::to_string(c.batch) + " exceeds dataset n " + std::to_string(c.dataset.n));
    }
    const auto& g = c.widths.g;
    const auto& d = c.widths.d;
    for (int w : {g.c4, g.c8, g.c16, g.c32, g.c64, d.c32, d.c16, d.c8, d.c4, d.decoder, c.widths.hfd}) {
        if (w < 1) throw std::invalid_argument("channel widths must be >= 1");
    }
}

namespace {

json dataset_json(const data::DatasetSpec& s) {
    json j{{"kind", data::kind_name(s.kind)}, {"n", s.n}, {"size", s.size}, {"seed", s.seed}, {"path", s.path.string()}};
    if (s.fixed_frequency) j["fixed_frequency"] = *s.fixed_frequency;
    if (s.tile) j["tile"] = *s.tile;
    if (s.amplitude_a) j["amplitude_a"] = *s.amplitude_a;
    if (s.amplitude_b) j["amplitude_b"] = *s.amplitude_b;
    return j;
}

data::DatasetSpec dataset_from(const json& j) {
    data::DatasetSpec s;
    s.kind = data::parse_kind(j.at("kind").get<std::string>());
    s.n = j.at("n").get<int>();
    s.size = j.at("size").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.path = j.value("path", std::string());
    if (j.contains("fixed_frequency")) s.fixed_frequency = j["fixed_frequency"].get<int>();
    if (j.contains("tile")) s.tile = j["tile"].get<int>();
    if (j.contains("amplitude_a")) s.amplitude_a = j["amplitude_a"].get<float>();
    if (j.contains("amplitude_b")) s.amplitude_b = j["amplitude_b"].get<float>();
    return s;
}

json config_json(const TrainConfig& c) {
    const auto& g = c.widths.g;
    const auto& d = c.widths.d;
    return json{
        {"seed", c.seed},
        {"batch", c.batch},
        {"iterations", c.iterations},
        {"lr", c.adam.lr},
        {"beta1", c.adam.beta1},
        {"beta2", c.adam.beta2},
        {"eps", c.adam.eps},
        {"hfd", c.ablation.hfd},
        {"hfa", c.ablation.hfa},
        {"fsc", c.ablation.fsc},
        {"hfd_g_sign", c.hfd_g_sign},
        {"dataset", dataset_json(c.dataset)},
        {"widths",
         {{"g", {g.c4, g.c8, g.c16, g.c32, g.c64}}, {"d", {d.c32, d.c16, d.c8, d.c4, d.decoder}}, {"hfd", c.widths.hfd}}},
        {"out_dir", c.out_dir.string()},
        {"log_interval", c.log_interval},
        {"checkpoint_interval", c.checkpoint_interval},
    };
}

TrainConfig config_from(const json& j) {
    TrainConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    c.batch = j.at("batch").get<int>();
    c.iterations = j.at("iterations").get<std::int64_t>();
    c.adam.lr = j.at("lr").get<float>();
    c.adam.beta1 = j.at("beta1").get<float>();
    c.adam.beta2 = j.at("beta2").get<float>();
    c.adam.eps = j.at("eps").get<float>();
    c.ablation.hfd = j.at("hfd").get<bool>();
    c.ablation.hfa = j.at("hfa").get<bool>();
    c.ablation.fsc = j.at("fsc").get<bool>();
    c.hfd_g_sign = j.at("hfd_g_sign").get<float>();
    c.dataset = dataset_from(j.at("dataset"));
    const auto& w = j.at("widths");
    const auto g = w.at("g").get<std::vector<int>>();
    const auto d = w.at("d").get<std::vector<int>>();
    if (g.size() != 5 || d.size() != 5) throw std::invalid_argument("config: widths.g and widths.d need 5 entries");
    c.widths.g = {g[0], g[1], g[2], g[3], g[4]};
    c.widths.d = {d[0], d[1], d[2], d[3], d[4]};
    c.widths.hfd = w.at("hfd").get<int>();
    c.out_dir = j.value("out_dir", std::string());
    c.log_interval = j.at("log_interval").get<std::int64_t>();
    c.checkpoint_interval = j.at("checkpoint_interval").get<std::int64_t>();
    return c;
}

}  // namespace

std::string to_json(const TrainConfig& config) { return config_json(config).dump(); }

TrainConfig config_from_json(const std::string& text) {
    try {
        return config_from(json::parse(text));
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config JSON: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Training

TrainingDiverged::TrainingDiverged(const std::string& term, std::int64_t iteration, float value)
    : std::runtime_error("non-finite " + term + " = " + std::to_string(value) + " at iteration " +
                         std::to_string(iteration)),
      term_(term),
      iteration_(iteration) {}

TrainState::TrainState(const TrainConfig& c)
    : config(c),
      model(c.widths, c.seed),
      d_params(model.d_side()),
      g_params(model.g_side()),
      adam_d(d_params, c.adam),
      adam_g(g_params, c.adam) {}

std::uint64_t d_latent_seed(std::uint64_t seed, std::int64_t it) {
    return derive_seed(seed, kLatentDStream, static_cast<std::uint64_t>(it));
}
std::uint64_t g_latent_seed(std::uint64_t seed, std::int64_t it) {
    return derive_seed(seed, kLatentGStream, static_cast<std::uint64_t>(it));
}
std::uint64_t batch_seed(std::uint64_t seed) { return derive_seed(seed, kBatchStream); }

namespace {

void require_finite(const gan::LossParts& parts, std::int64_t iteration) {
    try {
        gan::check_finite(parts);
    } catch (const gan::NonFiniteLoss& e) {
        const Tensor* t = nullptr;
        const std::string& term = e.term();
        if (term == "l_d") t = &parts.l_d;
        else if (term == "l_g") t = &parts.l_g;
        else if (term == "l_d_hf") t = &parts.l_d_hf;
        else if (term == "l_g_hf") t = &parts.l_g_hf;
        else if (term == "l_align") t = &parts.l_align;
        else t = &parts.l_recons;
        throw TrainingDiverged(term, iteration, t->item());
    }
}

float value_of(const Tensor& t) { return t.defined() ? t.item() : 0.0f; }

}  // namespace

gan::LossReport train_step(TrainState& st, const Tensor& real, const StepHooks* hooks) {
    const TrainConfig& cfg = st.config;
    const gan::Ablation& ab = cfg.ablation;
    const int n = real.shape().n;
    if (n < 2) throw std::invalid_argument("train_step: batch size must be >= 2 (got " + std::to_string(n) + ")");
    nets::Model& m = st.model;
    const std::int64_t it = st.iteration;
    gan::LossReport report;

    // Discriminator update; the generator runs detached.
    st.d_params.zero_grad();
    st.g_params.zero_grad();
    const Tensor fake = m.g.forward(nets::sample_latent(n, d_latent_seed(cfg.seed, it)), ab.fsc, true).image;
    const nets::DOutput on_real = m.d.forward(real);
    const nets::DOutput on_fake = m.d.forward(fake);
    gan::LossParts d_parts;
    d_parts.l_d = gan::hinge_d_loss(on_real.score, on_fake.score);
    d_parts.l_recons = gan::recon_loss(on_real.reconstruction, real);
    if (ab.hfd) d_parts.l_d_hf = gan::hfd_d_loss(on_real.taps, on_fake.taps, m.heads, &report.l_d_hf_by_scale);
    require_finite(d_parts, it);
    backward(gan::d_total(d_parts, ab));
    if (hooks && hooks->after_d_backward) hooks->after_d_backward(st);
    st.adam_d.step(st.d_params);
    st.d_params.zero_grad();

    // Generator update; the discriminator and heads run detached, and HFA
    // compares against the real-image taps from the pass above.
    const nets::GOutput gen = m.g.forward(nets::sample_latent(n, g_latent_seed(cfg.seed, it)), ab.fsc);
    const nets::DOutput judged = m.d.forward(gen.image, true);
    gan::LossParts g_parts;
    g_parts.l_g = gan::hinge_g_loss(judged.score);
    if (ab.hfd) g_parts.l_g_hf = gan::hfd_g_loss(judged.taps, m.heads, cfg.hfd_g_sign);
    if (ab.hfa) {
        auto hfa = gan::hfa_loss(on_real.taps.detached(), gen.taps);
        g_parts.l_align = hfa.total;
        report.l_align_by_scale = hfa.by_scale;
    }
    require_finite(g_parts, it);
    backward(gan::g_total(g_parts, ab));
    if (hooks && hooks->after_g_backward) hooks->after_g_backward(st);
    st.adam_g.step(st.g_params);

    report.l_d = value_of(d_parts.l_d);
    report.l_recons = value_of(d_parts.l_recons);
    report.l_d_hf = value_of(d_parts.l_d_hf);
    report.l_g = value_of(g_parts.l_g);
    report.l_g_hf = value_of(g_parts.l_g_hf);
    report.l_align = value_of(g_parts.l_align);
    ++st.iteration;
    return report;
}

// ---------------------------------------------------------------------------
// Checkpoint encoding

namespace {

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& buf, const std::string& origin) : buf_(buf), origin_(origin) {}

    std::uint64_t le(int bytes, const char* what) {
        need(bytes, what);
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
        pos_ += bytes;
        return v;
    }
    std::string str(std::size_t len, const char* what) {
        need(len, what);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), len);
        pos_ += len;
        return s;
    }
    std::size_t pos() const { return pos_; }
    void need(std::size_t bytes, const char* what) const {
        if (buf_.size() - pos_ < bytes) {
            throw CheckpointError("truncated checkpoint " + origin_ + ": missing " + what + " at byte " +
                                  std::to_string(pos_));
        }
    }

private:
    const std::vector<std::uint8_t>& buf_;
    const std::string& origin_;
    std::size_t pos_ = 0;
};

std::size_t dtype_size(DType t) { return t == DType::f32 ? 4 : 1; }

std::size_t element_count(const std::vector<std::int64_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const std::vector<CheckpointEntry>& entries) {
    std::vector<std::uint8_t> out(kMagic, kMagic + 8);
    put_le(out, entries.size(), 4);
    std::uint64_t offset = 0;
    for (const auto& e : entries) {
        if (e.name.size() > 0xffff) throw CheckpointError("checkpoint entry name too long: " + e.name);
        if (e.bytes.size() != element_count(e.shape) * dtype_size(e.dtype)) {
            throw CheckpointError("checkpoint entry " + e.name + ": payload does not match shape");
        }
        put_le(out, e.name.size(), 2);
        out.insert(out.end(), e.name.begin(), e.name.end());
        out.push_back(static_cast<std::uint8_t>(e.dtype));
        put_le(out, e.shape.size(), 1);
        for (auto d : e.shape) put_le(out, static_cast<std::uint64_t>(d), 8);
        put_le(out, offset, 8);
        offset += e.bytes.size();
    }
    for (const auto& e : entries) out.insert(out.end(), e.bytes.begin(), e.bytes.end());
    return out;
}

std::vector<CheckpointEntry> decode_checkpoint(const std::vector<std::uint8_t>& file, const std::string& origin) {
    Reader r(file, origin);
    if (r.str(8, "magic") != std::string(kMagic, 8)) throw CheckpointError("bad magic in checkpoint " + origin);
    const auto count = r.le(4, "entry count");
    struct Pending {
        CheckpointEntry entry;
        std::uint64_t offset;
    };
    std::vector<Pending> pending;
    for (std::uint64_t i = 0; i < count; ++i) {
        Pending p;
        const auto len = r.le(2, "name length");
        p.entry.name = r.str(len, "name");
        const auto dtype = r.le(1, "dtype");
        if (dtype > 1) throw CheckpointError("unknown dtype " + std::to_string(dtype) + " in checkpoint " + origin);
        p.entry.dtype = static_cast<DType>(dtype);
        const auto ndim = r.le(1, "rank");
        for (std::uint64_t k = 0; k < ndim; ++k) {
            const auto d = r.le(8, "dimension");
            if (d > (std::uint64_t{1} << 40)) throw CheckpointError("implausible dimension in checkpoint " + origin);
            p.entry.shape.push_back(static_cast<std::int64_t>(d));
        }
        p.offset = r.le(8, "offset");
        pending.push_back(std::move(p));
    }
    const std::size_t data_start = r.pos();
    const std::size_t data_size = file.size() - data_start;
    std::vector<CheckpointEntry> out;
    for (auto& p : pending) {
        const std::size_t bytes = element_count(p.entry.shape) * dtype_size(p.entry.dtype);
        if (p.offset > data_size || bytes > data_size - p.offset) {
            throw CheckpointError("truncated checkpoint " + origin + ": entry " + p.entry.name + " runs past end of file");
        }
        const auto* src = file.data() + data_start + p.offset;
        p.entry.bytes.assign(src, src + bytes);
        out.push_back(std::move(p.entry));
    }
    return out;
}

void write_checkpoint_file(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries) {
    const auto bytes = encode_checkpoint(entries);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot write checkpoint " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw CheckpointError("failed writing checkpoint " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw CheckpointError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

std::vector<CheckpointEntry> read_checkpoint_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(buf, path.string());
}

CheckpointEntry f32_entry(const std::string& name, const std::vector<std::int64_t>& shape, const float* values) {
    CheckpointEntry e;
    e.name = name;
    e.dtype = DType::f32;
    e.shape = shape;
    const std::size_t n = element_count(shape);
    e.bytes.reserve(n * 4);
    for (std::size_t i = 0; i < n; ++i) put_le(e.bytes, std::bit_cast<std::uint32_t>(values[i]), 4);
    return e;
}

std::vector<float> f32_values(const CheckpointEntry& e) {
    if (e.dtype != DType::f32) throw CheckpointError("entry " + e.name + " is not f32");
    std::vector<float> out(e.bytes.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t u = 0;
        for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(e.bytes[4 * i + b]) << (8 * b);
        out[i] = std::bit_cast<float>(u);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Train state persistence

namespace {

std::vector<std::int64_t> dims(const Shape& s) { return {s.n, s.c, s.h, s.w}; }

void add_optimizer(std::vector<CheckpointEntry>& out, const std::string& tag, const ParamSet& params, const Adam& adam) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& e = params.entries()[i];
        out.push_back(f32_entry(tag + "/m/" + e.name, dims(e.value.shape()), adam.first_moments()[i].data()));
        out.push_back(f32_entry(tag + "/v/" + e.name, dims(e.value.shape()), adam.second_moments()[i].data()));
    }
}

const CheckpointEntry& find_entry(const std::vector<CheckpointEntry>& entries, const std::string& name,
                                  const std::vector<std::int64_t>& shape, const std::filesystem::path& path) {
    for (const auto& e : entries) {
        if (e.name != name) continue;
        if (e.shape != shape || e.dtype != DType::f32) {
            throw CheckpointError("checkpoint " + path.string() + ": entry " + name + " has the wrong shape or dtype");
        }
        return e;
    }
    throw CheckpointError("checkpoint " + path.string() + " lacks entry " + name);
}

void restore(const std::vector<CheckpointEntry>& entries, const std::string& tag, ParamSet& params, Adam& adam,
             const std::filesystem::path& path) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& e = params.entries()[i];
        const auto shape = dims(e.value.shape());
        auto values = f32_values(find_entry(entries, "param/" + e.name, shape, path));
        std::copy(values.begin(), values.end(), e.value.mutable_data().begin());
        adam.first_moments()[i] = f32_values(find_entry(entries, tag + "/m/" + e.name, shape, path));
        adam.second_moments()[i] = f32_values(find_entry(entries, tag + "/v/" + e.name, shape, path));
    }
}

}  // namespace

void save_checkpoint(const TrainState& st, const std::filesystem::path& path) {
    std::vector<CheckpointEntry> entries;
    const json meta{{"version", kMetaVersion},
                    {"config", config_json(st.config)},
                    {"iteration", st.iteration},
                    {"adam_d_steps", st.adam_d.steps()},
                    {"adam_g_steps", st.adam_g.steps()}};
    const std::string text = meta.dump();
    CheckpointEntry m;
    m.name = "meta";
    m.dtype = DType::u8;
    m.shape = {static_cast<std::int64_t>(text.size())};
    m.bytes.assign(text.begin(), text.end());
    entries.push_back(std::move(m));
    for (const ParamSet* set : {&st.d_params, &st.g_params})
        for (const auto& e : set->entries()) entries.push_back(f32_entry("param/" + e.name, dims(e.value.shape()), e.value.data().data()));
    add_optimizer(entries, "adam_d", st.d_params, st.adam_d);
    add_optimizer(entries, "adam_g", st.g_params, st.adam_g);
    write_checkpoint_file(path, entries);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
    const auto entries = read_checkpoint_file(path);
    const CheckpointEntry* meta = nullptr;
    for (const auto& e : entries)
        if (e.name == "meta" && e.dtype == DType::u8) meta = &e;
    if (!meta) throw CheckpointError("checkpoint " + path.string() + " has no meta entry");
    json j;
    try {
        j = json::parse(std::string(meta->bytes.begin(), meta->bytes.end()));
        if (j.at("version").get<int>() != kMetaVersion) throw CheckpointError("unsupported checkpoint version in " + path.string());
        TrainState st(config_from(j.at("config")));
        st.iteration = j.at("iteration").get<std::int64_t>();
        st.adam_d.set_steps(j.at("adam_d_steps").get<std::int64_t>());
        st.adam_g.set_steps(j.at("adam_g_steps").get<std::int64_t>());
        restore(entries, "adam_d", st.d_params, st.adam_d, path);
        restore(entries, "adam_g", st.g_params, st.adam_g, path);
        return st;
    } catch (const json::exception& e) {
        throw CheckpointError("checkpoint " + path.string() + ": bad meta: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Loop

Trainer::Trainer(const TrainConfig& config) : Trainer(TrainState(config)) {}

Trainer::Trainer(TrainState state)
    : state_(std::move(state)),
      dataset_(data::make_dataset(state_.config.dataset)),
      batches_(dataset_, state_.config.batch, batch_seed(state_.config.seed)) {
    validate(state_.config);
    batches_.skip(static_cast<std::uint64_t>(state_.iteration));
}

gan::LossReport Trainer::step() { return train_step(state_, batches_.next()); }

std::string format_log_row(std::int64_t iteration, const gan::LossReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", static_cast<long long>(iteration), r.l_d, r.l_g,
                  r.l_d_hf, r.l_g_hf, r.l_align, r.l_recons);
    return buf;
}

LoopResult train_loop(const TrainConfig& config, const std::optional<std::filesystem::path>& resume) {
    validate(config);
    std::unique_ptr<Trainer> trainer;
    if (resume) {
        TrainState st = load_checkpoint(*resume);
        st.config.iterations = config.iterations;
        st.config.out_dir = config.out_dir;
        st.config.log_interval = config.log_interval;
        st.config.checkpoint_interval = config.checkpoint_interval;
        trainer = std::make_unique<Trainer>(std::move(st));
    } else {
        trainer = std::make_unique<Trainer>(config);
    }
    TrainState& st = trainer->state();
    const TrainConfig& cfg = st.config;

    LoopResult result;
    std::ofstream log;
    if (!cfg.out_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(cfg.out_dir, ec);
        if (ec) throw std::runtime_error("cannot create output directory " + cfg.out_dir.string() + ": " + ec.message());
        const auto log_path = cfg.out_dir / kLogName;
        const bool append = resume && std::filesystem::exists(log_path);
        log.open(log_path, append ? std::ios::app : std::ios::trunc);
        if (!log) throw std::runtime_error("cannot open log " + log_path.string());
        if (!append) log << kLogHeader << '\n';
        result.checkpoint = cfg.out_dir / kCheckpointName;
    }

    while (st.iteration < cfg.iterations) {
        const gan::LossReport report = trainer->step();
        const std::int64_t done = st.iteration;
        const bool last = done == cfg.iterations;
        if (done % cfg.log_interval == 0 || last) {
            result.logged.push_back(report);
            result.logged_iterations.push_back(done);
            if (log.is_open()) {
                log << format_log_row(done, report) << '\n';
                log.flush();
                if (!log) throw std::runtime_error("failed writing log in " + cfg.out_dir.string());
            }
        }
        if (!result.checkpoint.empty() && (last || (cfg.checkpoint_interval > 0 && done % cfg.checkpoint_interval == 0))) {
            save_checkpoint(st, result.checkpoint);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Sampling

Tensor generate(const nets::Generator& g, bool fsc_enabled, int n, std::uint64_t seed) {
    if (n < 0) throw std::invalid_argument("sample count must be >= 0");
    const std::size_t each = 3 * static_cast<std::size_t>(nets::kImageSize) * nets::kImageSize;
    std::vector<float> out;
    out.reserve(each * n);
    for (int chunk = 0; chunk * kSampleChunk < n; ++chunk) {
        const Tensor z = nets::sample_latent(kSampleChunk, derive_seed(seed, kSampleStream, static_cast<std::uint64_t>(chunk)));
        const Tensor img = g.forward(z, fsc_enabled, true).image;
        const int take = std::min(kSampleChunk, n - chunk * kSampleChunk);
        out.insert(out.end(), img.data().begin(), img.data().begin() + static_cast<std::ptrdiff_t>(each * take));
    }
    return Tensor::from_data({n, 3, nets::kImageSize, nets::kImageSize}, std::move(out));
}

std::vector<std::filesystem::path> sample(const std::filesystem::path& checkpoint, int n, std::uint64_t seed,
                                          const std::filesystem::path& out_dir) {
    if (n < 0) throw std::invalid_argument("sample count must be >= 0");
    const TrainState st = load_checkpoint(checkpoint);
    std::vector<std::filesystem::path> written;
    if (n == 0) return written;
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + out_dir.string() + ": " + ec.message());
    const Tensor images = generate(st.model.g, st.config.ablation.fsc, n, seed);
    const std::size_t each = 3 * static_cast<std::size_t>(nets::kImageSize) * nets::kImageSize;
    for (int i = 0; i < n; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "sample_%05d.png", i);
        const auto path = out_dir / name;
        data::write_image(path, images.data().data() + each * i, 3, nets::kImageSize);
        written.push_back(path);
    }
    return written;
}

}  // namespace fregan::train
