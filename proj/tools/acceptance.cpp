// Acceptance run: one PASS/FAIL line per criterion. Exit status is 0 only when
// every selected criterion passes.

#include <CLI11.hpp>

#include <algorithm>
#include <bit>
#include <cstdarg>
#include <filesystem>
#include <span>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>
#include <unistd.h>

#include "checks.hpp"
#include "cli.hpp"
#include "fregan/data.hpp"
#include "fregan/spectral.hpp"
#include "fregan/train.hpp"

using namespace fregan;

namespace {

// Pinned settings and tolerances.
constexpr double kReconstructionBudgetS = 5.0;
constexpr double kGradBudgetS = 60.0;
constexpr int kAdjointCases = 50;
constexpr int kBaselineSteps = 500;
constexpr int kSeeds = 5;
constexpr std::int64_t kSpectralIterations = 2000;
constexpr int kCorpusImages = 16;
constexpr int kGeneratedSamples = 64;
constexpr int kSpectralWins = 3;   // of kSeeds
constexpr int kAlignWins = 4;      // of kSeeds
constexpr double kAlignWindow = 0.10;
constexpr double kRunBudgetS = 600.0;
constexpr int kResumeSteps = 10;
constexpr int kResumeWarmup = 20;
constexpr int kPeakTolBins = 1;
constexpr std::uint64_t kSampleSeed = 0x5eed;

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void report(int id, bool pass, const std::string& what, const std::string& detail) {
    std::printf("criterion %2d: %s  %s | %s\n", id, pass ? "PASS" : "FAIL", what.c_str(), detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

bool finite(const gan::LossReport& r) {
    for (float v : {r.l_d, r.l_g, r.l_d_hf, r.l_g_hf, r.l_align, r.l_recons})
        if (!std::isfinite(v)) return false;
    return true;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool bits_equal(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::bit_cast<std::uint32_t>(a[i]) != std::bit_cast<std::uint32_t>(b[i])) return false;
    return true;
}

bool same_state(const train::TrainState& a, const train::TrainState& b) {
    if (a.iteration != b.iteration || train::to_json(a.config) != train::to_json(b.config)) return false;
    if (a.adam_d.steps() != b.adam_d.steps() || a.adam_g.steps() != b.adam_g.steps()) return false;
    for (const auto& [pa, pb] : {std::pair{&a.d_params, &b.d_params}, std::pair{&a.g_params, &b.g_params}}) {
        if (pa->size() != pb->size()) return false;
        for (std::size_t i = 0; i < pa->size(); ++i) {
            if (pa->entries()[i].name != pb->entries()[i].name) return false;
            if (!bits_equal(pa->entries()[i].value.data(), pb->entries()[i].value.data())) return false;
        }
    }
    for (const auto& [oa, ob] : {std::pair{&a.adam_d, &b.adam_d}, std::pair{&a.adam_g, &b.adam_g}}) {
        for (std::size_t i = 0; i < oa->first_moments().size(); ++i) {
            if (!bits_equal(oa->first_moments()[i], ob->first_moments()[i])) return false;
            if (!bits_equal(oa->second_moments()[i], ob->second_moments()[i])) return false;
        }
    }
    return true;
}

train::TrainConfig spectral_config(std::uint64_t seed, bool full) {
    train::TrainConfig c;
    c.seed = seed;
    c.iterations = kSpectralIterations;
    c.ablation = full ? gan::Ablation{true, true, true} : gan::Ablation{false, false, false};
    c.dataset.kind = data::DatasetKind::sinusoid_mix;
    c.dataset.n = kCorpusImages;
    c.dataset.size = nets::kImageSize;
    c.dataset.seed = 0;  // one corpus shared by every run
    return c;
}

struct RunOutcome {
    bool finished = false;
    std::string failure;
    double seconds = 0.0;
    spectral::SpectrumDistance distance;
    double align_first = 0.0, align_last = 0.0;
    bool all_finite = true;
};

RunOutcome spectral_run(std::uint64_t seed, bool full, const spectral::SpectrumProfile& corpus) {
    RunOutcome out;
    const auto t0 = Clock::now();
    try {
        train::Trainer trainer(spectral_config(seed, full));
        std::vector<double> align;
        for (std::int64_t i = 0; i < kSpectralIterations; ++i) {
            const auto r = trainer.step();
            out.all_finite = out.all_finite && finite(r);
            align.push_back(r.l_align);
        }
        const Tensor samples = train::generate(trainer.state().model.g, full, kGeneratedSamples, kSampleSeed);
        const auto profile = spectral::azimuthal_average(spectral::power_spectrum_2d(samples));
        out.distance = spectral::spectrum_distance(profile, corpus);
        const auto window = static_cast<std::ptrdiff_t>(std::llround(kAlignWindow * kSpectralIterations));
        out.align_first = median({align.begin(), align.begin() + window});
        out.align_last = median({align.end() - window, align.end()});
        out.finished = true;
    } catch (const std::exception& e) {
        out.failure = e.what();
        out.all_finite = false;
    }
    out.seconds = since(t0);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria 1-11"};
    std::vector<int> only;
    app.add_option("--only", only, "Run just these criteria")->delimiter(',')->check(CLI::Range(1, 11));
    CLI11_PARSE(app, argc, argv);
    const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}
                                                : std::set<int>(only.begin(), only.end());
    auto want = [&](int id) { return selected.count(id) > 0; };
    bool all = true;
    auto record = [&](int id, bool pass, const std::string& what, const std::string& detail) {
        all = all && pass;
        report(id, pass, what, detail);
    };

    const checks::CorpusOptions corpus;  // 100 tensors up to 4x8x64x64
    if (want(1)) {
        const auto r = checks::reconstruction(corpus);
        record(1, r.passed && r.seconds < kReconstructionBudgetS, "perfect reconstruction",
               r.detail + fmt(" cases=%d seconds=%.2f budget=%.0fs", corpus.cases, r.seconds, kReconstructionBudgetS));
    }
    if (want(2)) {
        const auto r = checks::parseval(corpus);
        record(2, r.passed, "Parseval and band shares",
               r.detail + fmt(" tol=%.0e share_tol=%.0e", checks::kParsevalTol, checks::kShareSumTol));
    }
    if (want(3)) {
        const auto r = checks::gradients();
        record(3, r.passed && r.seconds < kGradBudgetS, "gradient suite",
               r.detail + fmt(" tol=%.0e seconds=%.2f budget=%.0fs", checks::kGradTol, r.seconds, kGradBudgetS));
    }
    if (want(4)) {
        const auto r = checks::adjoint(kAdjointCases);
        record(4, r.passed, "conv adjointness", r.detail + fmt(" tol=%.0e", checks::kAdjointTol));
    }
    if (want(5)) {
        const auto r = checks::analytic_wavelet();
        record(5, r.passed, "analytic wavelet cases", r.detail + fmt(" tol=%.0e", checks::kAnalyticTol));
    }

    bool no_divergence = true;
    std::string divergence_detail;
    int divergence_runs = 0;

    if (want(6) || want(9)) {
        std::vector<gan::LossReport> reports;
        const auto r = checks::baseline_equivalence(spectral_config(0, false), kBaselineSteps, &reports);
        if (want(6)) record(6, r.passed, "baseline equivalence", r.detail + fmt(" seconds=%.1f", r.seconds));
        ++divergence_runs;
        for (const auto& rep : reports) no_divergence = no_divergence && finite(rep);
        if (reports.size() != static_cast<std::size_t>(kBaselineSteps) && !r.passed) {
            // A mismatch stops early; the remaining steps are still required finite.
            train::Trainer t(spectral_config(0, false));
            for (int i = 0; i < kBaselineSteps; ++i) no_divergence = no_divergence && finite(t.step());
        }
    }

    if (want(7) || want(8) || want(9)) {
        const auto corpus_images = data::synth_dataset(spectral_config(0, true).dataset).all();
        const auto corpus_profile = spectral::azimuthal_average(spectral::power_spectrum_2d(corpus_images));
        int dist_wins = 0, gap_wins = 0, align_wins = 0;
        double slowest = 0.0;
        bool all_finished = true;
        std::ostringstream per_seed;
        for (int s = 0; s < kSeeds; ++s) {
            const auto seed = static_cast<std::uint64_t>(s);
            const RunOutcome base = spectral_run(seed, false, corpus_profile);
            const RunOutcome full = spectral_run(seed, true, corpus_profile);
            divergence_runs += 2;
            slowest = std::max({slowest, base.seconds, full.seconds});
            for (const auto* o : {&base, &full}) {
                no_divergence = no_divergence && o->all_finite;
                if (!o->finished) {
                    all_finished = false;
                    divergence_detail += fmt(" seed%d:%s", s, o->failure.c_str());
                }
            }
            if (base.finished && full.finished) {
                dist_wins += full.distance.distance <= base.distance.distance;
                gap_wins += full.distance.high_half_gap <= base.distance.high_half_gap;
                align_wins += full.align_last < full.align_first;
            }
            std::fprintf(stderr,
                         "seed %d: distance base=%.4f full=%.4f | high-half gap base=%.4f full=%.4f | "
                         "l_align first10%%=%.4f last10%%=%.4f | seconds base=%.0f full=%.0f\n",
                         s, base.distance.distance, full.distance.distance, base.distance.high_half_gap,
                         full.distance.high_half_gap, full.align_first, full.align_last, base.seconds, full.seconds);
            per_seed << fmt(" s%d[d %.3f/%.3f g %.3f/%.3f a %.3f->%.3f]", s, full.distance.distance,
                            base.distance.distance, full.distance.high_half_gap, base.distance.high_half_gap,
                            full.align_first, full.align_last);
        }
        if (want(7)) {
            const bool pass = all_finished && dist_wins >= kSpectralWins && gap_wins >= kSpectralWins &&
                              slowest <= kRunBudgetS;
            record(7, pass, "spectral distance full <= baseline",
                   fmt("distance_wins=%d/%d high_half_wins=%d/%d need=%d slowest_run=%.0fs budget=%.0fs", dist_wins,
                       kSeeds, gap_wins, kSeeds, kSpectralWins, slowest, kRunBudgetS) +
                       " full/base:" + per_seed.str());
        }
        if (want(8)) {
            record(8, all_finished && align_wins >= kAlignWins, "l_align decreases",
                   fmt("seeds_with_last10%%_median_below_first10%%=%d/%d need=%d", align_wins, kSeeds, kAlignWins));
        }
    }
    if (want(9)) {
        record(9, no_divergence, "no NaN/Inf in logged losses",
               fmt("runs=%d", divergence_runs) + (divergence_detail.empty() ? "" : divergence_detail));
    }

    if (want(10)) {
        bool round_trip = false, resume = false;
        std::string detail;
        try {
            const auto dir = std::filesystem::temp_directory_path() / ("fregan_acceptance_" + std::to_string(::getpid()));
            std::filesystem::create_directories(dir);
            auto cfg = spectral_config(11, true);
            train::Trainer a(cfg);
            for (int i = 0; i < kResumeWarmup; ++i) a.step();
            const auto path = dir / "state.fgc";
            train::save_checkpoint(a.state(), path);
            train::TrainState loaded = train::load_checkpoint(path);
            round_trip = same_state(a.state(), loaded);
            train::Trainer b(std::move(loaded));
            resume = true;
            for (int i = 0; i < kResumeSteps; ++i) resume = resume && a.step() == b.step();
            resume = resume && same_state(a.state(), b.state());
            std::filesystem::remove_all(dir);
            detail = fmt("round_trip_bit_exact=%d resume_%d_steps_bit_exact=%d", round_trip, kResumeSteps, resume);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        record(10, round_trip && resume, "checkpoint fidelity", detail);
    }

    if (want(11)) {
        bool peaks = true;
        std::string detail;
        for (int k : {3, 7, 13}) {
            data::DatasetSpec spec;
            spec.n = kCorpusImages;
            spec.size = nets::kImageSize;
            spec.seed = static_cast<std::uint64_t>(k);
            spec.fixed_frequency = k;
            const auto prof = spectral::azimuthal_average(spectral::power_spectrum_2d(data::synth_dataset(spec).all()));
            const auto peak = std::max_element(prof.mean.begin(), prof.mean.end()) - prof.mean.begin();
            peaks = peaks && std::abs(static_cast<int>(peak) - k) <= kPeakTolBins;
            detail += fmt("k=%d peak=%d ", k, static_cast<int>(peak));
        }
        std::string printed;
        try {
            const auto dir = std::filesystem::temp_directory_path() / ("fregan_compare_" + std::to_string(::getpid()));
            data::DatasetSpec spec;
            spec.n = kCorpusImages;
            spec.size = nets::kImageSize;
            const auto set = data::synth_dataset(spec);
            std::filesystem::create_directories(dir);
            for (std::size_t i = 0; i < set.count(); ++i) {
                data::write_image(dir / ("img" + std::to_string(100 + i) + ".png"), set.image(i).data(), 3, spec.size);
            }
            std::ostringstream out, err;
            cli::run({"compare", dir.string(), dir.string()}, out, err);
            std::filesystem::remove_all(dir);
            std::istringstream lines(out.str());
            std::string line;
            while (std::getline(lines, line))
                if (line.rfind("distance=", 0) == 0) printed = line.substr(9);
        } catch (const std::exception& e) {
            printed = std::string("exception: ") + e.what();
        }
        record(11, peaks && printed == "0.0", "spectral oracle",
               detail + fmt("tol=+-%d bins compare(dir,dir)=%s", kPeakTolBins, printed.c_str()));
    }

    std::printf("acceptance: %s\n", all ? "ALL PASS" : "FAILURES");
    return all ? 0 : 1;
}
