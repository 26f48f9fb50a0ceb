#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <type_traits>

#include "checks.hpp"
#include "flat_toml.hpp"
#include "fregan/data.hpp"
#include "fregan/image_io.hpp"
#include "fregan/spectral.hpp"
#include "fregan/train.hpp"
#include "fregan/wavelet.hpp"

namespace fregan::cli {

namespace {

class UserError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string dataset = "sinusoid-mix";
    std::string data_dir;
    int n = 16;
    int size = 64;
    std::int64_t iters = 2000;
    int batch = 8;
    std::uint64_t seed = 0;
    float lr = 2e-4f;
    bool no_hfd = false, no_hfa = false, no_fsc = false;
    std::string out;
    std::string checkpoint;
    int levels = 1;
    int frequency = -1;
    std::int64_t log_interval = 1;
    std::int64_t checkpoint_interval = 0;
    int steps = 20;
    std::string config;
    std::string image;
    std::string dir;
    std::vector<std::string> dirs;
    bool inject_kernel_fault = false;
};

template <class T>
std::string show(const T& v) {
    if constexpr (std::is_same_v<T, std::string>) {
        return v;
    } else if constexpr (std::is_same_v<T, bool>) {
        return v ? "true" : "false";
    } else if constexpr (std::is_floating_point_v<T>) {
        // Shortest digits that survive a round trip at the variable's own precision.
        for (int prec = 1; prec <= 17; ++prec) {
            char buf[48];
            std::snprintf(buf, sizeof buf, "%.*g", prec, static_cast<double>(v));
            if (static_cast<T>(std::strtod(buf, nullptr)) == v) return format_number(std::strtod(buf, nullptr));
        }
        return format_number(v);
    } else {
        return std::to_string(v);
    }
}

template <class T>
T from_toml(const toml::Value& v, const std::string& key) {
    auto wrong = [&] { return UserError("config key '" + key + "' has the wrong type (" + toml::type_name(v) + ")"); };
    if constexpr (std::is_same_v<T, std::string>) {
        if (auto* s = std::get_if<std::string>(&v)) return *s;
        throw wrong();
    } else if constexpr (std::is_same_v<T, bool>) {
        if (auto* b = std::get_if<bool>(&v)) return *b;
        throw wrong();
    } else if constexpr (std::is_floating_point_v<T>) {
        if (auto* d = std::get_if<double>(&v)) return static_cast<T>(*d);
        if (auto* i = std::get_if<long long>(&v)) return static_cast<T>(*i);
        throw wrong();
    } else {
        if (auto* i = std::get_if<long long>(&v)) {
            if (std::is_unsigned_v<T> && *i < 0) throw UserError("config key '" + key + "' must be non-negative");
            return static_cast<T>(*i);
        }
        throw wrong();
    }
}

// Options of one subcommand, settable from flags and from the config file.
class Binder {
public:
    explicit Binder(CLI::App* app) : app_(app) {}

    template <class T>
    void opt(const std::string& name, T& var, const std::string& help) {
        CLI::Option* o = std::is_same_v<T, bool> ? app_->add_flag("--" + name, var, help)
                                                 : app_->add_option("--" + name, var, help);
        keys_[name] = Key{o, [&var, name](const toml::Value& v) { var = from_toml<T>(v, name); },
                          [&var] { return show(var); }};
        order_.push_back(name);
    }

    void apply(const std::map<std::string, toml::Value>& file, const std::string& command) {
        for (const auto& [raw, value] : file) {
            std::string key = raw;
            for (char& c : key)
                if (c == '_') c = '-';
            auto it = keys_.find(key);
            if (it == keys_.end() || key == "config") {
                throw UserError("config key '" + raw + "' does not apply to '" + command + "'");
            }
            it->second.set(value);
            from_file_.push_back(key);
        }
    }

    bool given(const std::string& key) const {
        auto it = keys_.find(key);
        if (it == keys_.end()) return false;
        return it->second.option->count() > 0 || std::find(from_file_.begin(), from_file_.end(), key) != from_file_.end();
    }

    void echo(std::ostream& err, const std::string& command) const {
        err << "# fregan " << command << " resolved config\n";
        for (const auto& k : order_) {
            if (k == "config") continue;
            err << "# " << k << '=' << keys_.at(k).show() << '\n';
        }
    }

private:
    struct Key {
        CLI::Option* option;
        std::function<void(const toml::Value&)> set;
        std::function<std::string()> show;
    };
    CLI::App* app_;
    std::map<std::string, Key> keys_;
    std::vector<std::string> order_;
    std::vector<std::string> from_file_;
};

struct Parser {
    CLI::App app{"Frequency-aware GAN laboratory", "fregan"};
    std::map<std::string, std::unique_ptr<Binder>> binders;

    explicit Parser(Options& o) {
        app.require_subcommand(1, 1);
        app.set_help_all_flag("--help-all");

        auto* train = add("train", "Train a model; prints the loss log as CSV");
        auto& t = *binders["train"];
        t.opt("dataset", o.dataset, "sinusoid-mix | checkerboard | gradient-blobs | directory");
        t.opt("data-dir", o.data_dir, "Image directory (implies --dataset directory)");
        t.opt("n", o.n, "Number of corpus images");
        t.opt("size", o.size, "Image size (training requires 64)");
        t.opt("iters", o.iters, "Training iterations");
        t.opt("batch", o.batch, "Batch size");
        t.opt("seed", o.seed, "Seed for data, init and latents");
        t.opt("lr", o.lr, "Adam learning rate");
        t.opt("no-hfd", o.no_hfd, "Disable the high-frequency discriminator");
        t.opt("no-hfa", o.no_hfa, "Disable high-frequency alignment");
        t.opt("no-fsc", o.no_fsc, "Disable the frequency skip connection");
        t.opt("out", o.out, "Run directory for log.csv, config.json and checkpoint.fgc");
        t.opt("checkpoint", o.checkpoint, "Resume from this checkpoint");
        t.opt("frequency", o.frequency, "sinusoid-mix: single horizontal frequency");
        t.opt("log-interval", o.log_interval, "Log every N iterations");
        t.opt("checkpoint-interval", o.checkpoint_interval, "Checkpoint every N iterations (0: at the end)");
        t.opt("config", o.config, "Flat TOML file; flags override its values");
        (void)train;

        add("sample", "Write generated PNGs from a checkpoint");
        auto& s = *binders["sample"];
        s.opt("checkpoint", o.checkpoint, "Checkpoint file");
        s.opt("n", o.n, "Number of images");
        s.opt("seed", o.seed, "Latent seed");
        s.opt("out", o.out, "Output directory");
        s.opt("config", o.config, "Flat TOML file; flags override its values");

        auto* dec = add("decompose", "Haar decomposition of one image into band PNGs and CSVs");
        dec->add_option("image", o.image, "PNG or PPM image")->required();
        auto& d = *binders["decompose"];
        d.opt("levels", o.levels, "Decomposition levels");
        d.opt("out", o.out, "Output directory");
        d.opt("config", o.config, "Flat TOML file; flags override its values");

        auto* spec = add("spectrum", "Mean power spectrum of a corpus; prints the radial profile CSV");
        spec->add_option("dir", o.dir, "Image directory (or use --dataset)");
        auto& p = *binders["spectrum"];
        p.opt("dataset", o.dataset, "Synthetic corpus when no directory is given");
        p.opt("data-dir", o.data_dir, "Image directory");
        p.opt("n", o.n, "Synthetic corpus size");
        p.opt("size", o.size, "Images are area-resized to this size");
        p.opt("seed", o.seed, "Synthetic corpus seed");
        p.opt("frequency", o.frequency, "sinusoid-mix: single horizontal frequency");
        p.opt("out", o.out, "Output directory");
        p.opt("config", o.config, "Flat TOML file; flags override its values");

        auto* cmp = add("compare", "Radial spectrum distance between two corpora");
        cmp->add_option("dirs", o.dirs, "Two image directories")->expected(2)->required();
        auto& c = *binders["compare"];
        c.opt("size", o.size, "Images are area-resized to this size");
        c.opt("out", o.out, "Optional directory for gap.csv and both profiles");
        c.opt("config", o.config, "Flat TOML file; flags override its values");

        auto* ver = add("verify", "Run the invariant suites; prints one CSV row per suite");
        auto& v = *binders["verify"];
        v.opt("steps", o.steps, "Baseline-equivalence steps");
        v.opt("seed", o.seed, "Seed for the baseline-equivalence run");
        v.opt("config", o.config, "Flat TOML file; flags override its values");
        // Test hook: perturbs the Haar kernels used by the reconstruction suite.
        ver->add_flag("--inject-kernel-fault", o.inject_kernel_fault)->group("");
    }

    CLI::App* add(const std::string& name, const std::string& help) {
        CLI::App* sub = app.add_subcommand(name, help);
        binders[name] = std::make_unique<Binder>(sub);
        return sub;
    }

    std::string chosen() const {
        for (const auto* sub : app.get_subcommands()) return sub->get_name();
        return {};
    }
};

void parse(Parser& p, const std::vector<std::string>& args) {
    std::vector<std::string> storage;
    storage.push_back("fregan");
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());
    p.app.parse(static_cast<int>(argv.size()), argv.data());
}

std::filesystem::path require_out(const Options& o, const char* command) {
    if (o.out.empty()) throw UserError(std::string(command) + ": --out is required");
    return o.out;
}

data::DatasetSpec dataset_spec(const Options& o, const Binder& b) {
    data::DatasetSpec s;
    if (!o.data_dir.empty()) {
        if (b.given("dataset") && o.dataset != "directory") throw UserError("--data-dir conflicts with --dataset " + o.dataset);
        s.kind = data::DatasetKind::directory;
        s.path = o.data_dir;
    } else {
        s.kind = data::parse_kind(o.dataset);
        if (s.kind == data::DatasetKind::directory) throw UserError("--dataset directory needs --data-dir");
    }
    s.n = o.n;
    s.size = o.size;
    s.seed = o.seed;
    if (o.frequency >= 0) {
        if (s.kind != data::DatasetKind::sinusoid_mix) throw UserError("--frequency applies to sinusoid-mix only");
        s.fixed_frequency = o.frequency;
    }
    return s;
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------

int cmd_train(const Options& o, const Binder& b, std::ostream& out, std::ostream& err) {
    train::TrainConfig cfg;
    const bool resume = !o.checkpoint.empty();
    if (resume) {
        for (const char* k : {"dataset", "data-dir", "n", "size", "batch", "seed", "lr", "no-hfd", "no-hfa", "no-fsc",
                              "frequency"}) {
            if (b.given(k)) throw UserError(std::string("--") + k + " cannot change when resuming from a checkpoint");
        }
        cfg = train::load_checkpoint(o.checkpoint).config;
    } else {
        cfg.seed = o.seed;
        cfg.batch = o.batch;
        cfg.adam.lr = o.lr;
        cfg.ablation = {!o.no_hfd, !o.no_hfa, !o.no_fsc};
        cfg.dataset = dataset_spec(o, b);
    }
    cfg.iterations = o.iters;
    cfg.out_dir = o.out;
    cfg.log_interval = o.log_interval;
    cfg.checkpoint_interval = o.checkpoint_interval;
    if (cfg.log_interval < 1) throw UserError("--log-interval must be >= 1");
    if (cfg.checkpoint_interval < 0) throw UserError("--checkpoint-interval must be >= 0");

    const std::string json = train::to_json(cfg);
    err << "# training config " << json << '\n';
    if (!cfg.out_dir.empty()) {
        ensure_dir(cfg.out_dir);
        std::ofstream(cfg.out_dir / "config.json") << json << '\n';
    }
    const auto result =
        resume ? train::train_loop(cfg, std::filesystem::path(o.checkpoint)) : train::train_loop(cfg);
    out << train::kLogHeader << '\n';
    for (std::size_t i = 0; i < result.logged.size(); ++i) {
        out << train::format_log_row(result.logged_iterations[i], result.logged[i]) << '\n';
    }
    if (!result.checkpoint.empty()) err << "# checkpoint " << result.checkpoint.string() << '\n';
    return kExitOk;
}

int cmd_sample(const Options& o, std::ostream& out) {
    if (o.checkpoint.empty()) throw UserError("sample: --checkpoint is required");
    const auto dir = require_out(o, "sample");
    const auto files = train::sample(o.checkpoint, o.n, o.seed, dir);
    out << "count=" << files.size() << '\n' << "out=" << dir.string() << '\n';
    return kExitOk;
}

void write_band(const std::filesystem::path& stem, const Tensor& band) {
    const Shape& s = band.shape();
    float peak = 0.0f;
    for (float v : band.data()) peak = std::max(peak, std::fabs(v));
    // Symmetric linear map so a zero band is uniform mid-gray.
    io::Image8 img{s.w, s.h, s.c, std::vector<std::uint8_t>(band.numel())};
    for (int c = 0; c < s.c; ++c)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                const float v = band.at(0, c, y, x);
                const double t = peak > 0.0f ? 0.5 + 0.5 * v / peak : 0.5;
                img.pixels[(static_cast<std::size_t>(y) * s.w + x) * s.c + c] =
                    static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
            }
    auto png = stem;
    png += ".png";
    io::write_png(png, img);

    auto csv = stem;
    csv += ".csv";
    std::ofstream f(csv);
    if (!f) throw std::runtime_error("cannot write " + csv.string());
    f << "channel,row,col,value\n";
    char buf[64];
    for (int c = 0; c < s.c; ++c)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                std::snprintf(buf, sizeof buf, "%d,%d,%d,%.9g\n", c, y, x, band.at(0, c, y, x));
                f << buf;
            }
    if (!f) throw std::runtime_error("failed writing " + csv.string());
}

int cmd_decompose(const Options& o, std::ostream& out) {
    const auto dir = require_out(o, "decompose");
    if (o.levels < 1) throw UserError("--levels must be >= 1");
    const io::Image8 img = io::read_image(o.image);
    const int div = 1 << o.levels;
    if (img.width % div != 0 || img.height % div != 0) {
        throw UserError("decompose: " + std::to_string(img.width) + "x" + std::to_string(img.height) + " image " +
                        o.image + " is not divisible by 2^" + std::to_string(o.levels));
    }
    std::vector<float> planar(img.pixels.size());
    const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
    for (std::size_t p = 0; p < plane; ++p)
        for (int c = 0; c < img.channels; ++c) planar[c * plane + p] = io::from_byte(img.pixels[p * img.channels + c]);
    const Tensor x = Tensor::from_data({1, img.channels, img.height, img.width}, std::move(planar));
    const auto levels = wavelet::dwt_image(x, o.levels);

    ensure_dir(dir);
    out << "level,band,height,width,file\n";
    auto emit = [&](int level, const char* name, const Tensor& band) {
        const std::string stem = "level" + std::to_string(level) + "_" + name;
        write_band(dir / stem, band);
        out << level << ',' << name << ',' << band.shape().h << ',' << band.shape().w << ',' << stem << '\n';
    };
    for (std::size_t l = 0; l < levels.size(); ++l) {
        const int level = static_cast<int>(l) + 1;
        if (l + 1 == levels.size()) emit(level, "LL", levels[l].ll);
        emit(level, "LH", levels[l].lh);
        emit(level, "HL", levels[l].hl);
        emit(level, "HH", levels[l].hh);
    }
    return kExitOk;
}

Tensor load_corpus(const std::filesystem::path& dir, int size) {
    return data::load_image_dir(dir, size).all();
}

int cmd_spectrum(const Options& o, const Binder& b, std::ostream& out) {
    const auto dir = require_out(o, "spectrum");
    if (!o.dir.empty() && !o.data_dir.empty()) throw UserError("spectrum: give either a directory or --data-dir");
    Tensor images;
    const std::string source = o.dir.empty() ? o.data_dir : o.dir;
    if (!source.empty()) {
        if (b.given("dataset") || b.given("n") || b.given("seed") || b.given("frequency")) {
            throw UserError("spectrum: --dataset/--n/--seed/--frequency apply to synthetic corpora only");
        }
        images = load_corpus(source, o.size);
    } else {
        images = data::synth_dataset(dataset_spec(o, b)).all();
    }
    const auto spec = spectral::power_spectrum_2d(images);
    const auto profile = spectral::azimuthal_average(spec);
    ensure_dir(dir);
    spectral::write_spectrum_png(dir / "spectrum.png", spec);
    spectral::write_spectrum_csv(dir / "spectrum.csv", spec);
    spectral::write_profile_csv(dir / "profile.csv", profile);
    spectral::write_slice_csv(dir / "slice.csv", spectral::spectrum_slice(spec));
    out << "bin,mean,variance\n";
    for (std::size_t i = 0; i < profile.bins(); ++i) {
        out << i << ',' << format_number(profile.mean[i]) << ',' << format_number(profile.variance[i]) << '\n';
    }
    return kExitOk;
}

int cmd_compare(const Options& o, std::ostream& out) {
    const auto a = spectral::azimuthal_average(spectral::power_spectrum_2d(load_corpus(o.dirs.at(0), o.size)));
    const auto b = spectral::azimuthal_average(spectral::power_spectrum_2d(load_corpus(o.dirs.at(1), o.size)));
    const auto d = spectral::spectrum_distance(a, b);
    if (!o.out.empty()) {
        ensure_dir(o.out);
        spectral::write_gap_csv(std::filesystem::path(o.out) / "gap.csv", d);
        spectral::write_profile_csv(std::filesystem::path(o.out) / "profile_a.csv", a);
        spectral::write_profile_csv(std::filesystem::path(o.out) / "profile_b.csv", b);
    }
    out << "distance=" << format_number(d.distance) << '\n'
        << "high_half_gap=" << format_number(d.high_half_gap) << '\n'
        << "bins=" << d.gap.size() << '\n';
    return kExitOk;
}

int cmd_verify(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.steps < 1) throw UserError("--steps must be >= 1");
    train::TrainConfig base;
    base.seed = o.seed;
    base.batch = 4;
    base.dataset.n = 8;
    base.dataset.seed = o.seed;
    base.widths.g = {16, 16, 8, 8, 4};
    base.widths.d = {4, 8, 16, 16, 4};

    const checks::CorpusOptions corpus;
    std::vector<checks::SuiteResult> results;
    results.push_back(o.inject_kernel_fault ? checks::reconstruction(corpus, checks::perturbed_kernels())
                                            : checks::reconstruction(corpus));
    results.push_back(checks::parseval(corpus));
    results.push_back(checks::adjoint());
    results.push_back(checks::gradients());
    results.push_back(checks::analytic_wavelet());
    results.push_back(checks::baseline_equivalence(base, o.steps));

    out << "suite,result,seconds,detail\n";
    std::string failed;
    for (const auto& r : results) {
        char secs[32];
        std::snprintf(secs, sizeof secs, "%.3f", r.seconds);
        std::string detail = r.detail;
        std::replace(detail.begin(), detail.end(), ',', ';');
        out << r.name << ',' << (r.passed ? "pass" : "fail") << ',' << secs << ',' << detail << '\n';
        if (!r.passed) failed += (failed.empty() ? "" : " ") + r.name;
    }
    if (!failed.empty()) {
        err << "verify: failing suites: " << failed << '\n';
        return kExitInvariant;
    }
    return kExitOk;
}

}  // namespace

std::string format_number(double v) {
    char buf[48];
    int prec = 1;
    for (; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::isnan(v) || std::strtod(buf, nullptr) == v) break;
    }
    std::string s = buf;
    const double mag = std::fabs(v);
    if (s.find('e') != std::string::npos && mag >= 1e-4 && mag < 1e15) {
        // Same significant digits in positional notation.
        const int decimals = std::max(0, prec - 1 - static_cast<int>(std::floor(std::log10(mag))));
        std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
        s = buf;
    }
    if (s.find_first_of(".eni") == std::string::npos) s += ".0";
    return s;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        // First pass only finds the subcommand and the config file.
        Options probe;
        Parser first(probe);
        try {
            parse(first, args);
        } catch (const CLI::ParseError& e) {
            const int code = first.app.exit(e, out, err);
            return code == 0 ? kExitOk : kExitUserError;
        }
        const std::string command = first.chosen();

        Options o;
        Parser p(o);
        Binder& binder = *p.binders.at(command);
        if (!probe.config.empty()) binder.apply(toml::parse_file(probe.config), command);
        parse(p, args);
        binder.echo(err, command);

        if (command == "train") return cmd_train(o, binder, out, err);
        if (command == "sample") return cmd_sample(o, out);
        if (command == "decompose") return cmd_decompose(o, out);
        if (command == "spectrum") return cmd_spectrum(o, binder, out);
        if (command == "compare") return cmd_compare(o, out);
        if (command == "verify") return cmd_verify(o, out, err);
        throw UserError("unknown subcommand " + command);
    } catch (const train::TrainingDiverged& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvariant;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUserError;
    } catch (const std::logic_error& e) {
        err << "internal error: " << e.what() << '\n';
        return kExitInvariant;
    } catch (const std::exception& e) {
        // I/O, parse and checkpoint errors.
        err << "error: " << e.what() << '\n';
        return kExitUserError;
    }
}

}  // namespace fregan::cli
