#include <cmath>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "fregan/image_io.hpp"
#include "test_util.hpp"

using namespace fregan;
using fregan::testing::read_bytes;
using fregan::testing::TempDir;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> v;
    std::istringstream in(s);
    std::string l;
    while (std::getline(in, l)) v.push_back(l);
    return v;
}

std::vector<std::string> split(const std::string& s, char sep = ',') {
    std::vector<std::string> v;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            v.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    v.push_back(cur);
    return v;
}

std::map<std::string, std::string> key_values(const std::string& s) {
    std::map<std::string, std::string> m;
    for (const auto& l : lines(s)) {
        const auto eq = l.find('=');
        if (eq != std::string::npos) m[l.substr(0, eq)] = l.substr(eq + 1);
    }
    return m;
}

void write_rgb(const std::filesystem::path& p, int w, int h, const std::function<std::uint8_t(int, int, int)>& f) {
    io::Image8 img{w, h, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.pixels[(static_cast<std::size_t>(y) * w + x) * 3 + c] = f(y, x, c);
    io::write_png(p, img);
}

// channel,row,col,value rows into a C×H×W grid.
std::vector<std::vector<std::vector<double>>> read_band(const std::filesystem::path& csv, int c, int h, int w) {
    std::vector<std::vector<std::vector<double>>> g(c, std::vector<std::vector<double>>(h, std::vector<double>(w, NAN)));
    std::ifstream in(csv);
    std::string l;
    std::getline(in, l);
    REQUIRE(l == "channel,row,col,value");
    while (std::getline(in, l)) {
        const auto f = split(l);
        g[std::stoi(f[0])][std::stoi(f[1])][std::stoi(f[2])] = std::stod(f[3]);
    }
    return g;
}

}  // namespace

TEST_CASE("format_number") {
    CHECK(cli::format_number(0.0) == "0.0");
    CHECK(cli::format_number(-10.0) == "-10.0");
    CHECK(cli::format_number(1.5) == "1.5");
    CHECK(cli::format_number(0.1) == "0.1");
    CHECK(std::stod(cli::format_number(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(std::stod(cli::format_number(6.02e23)) == 6.02e23);
    CHECK(std::stod(cli::format_number(-2.5e-9)) == -2.5e-9);
}

TEST_CASE("usage errors exit 1") {
    auto r = run({"train", "--bogus"});
    CHECK(r.code == cli::kExitUserError);
    CHECK(r.err.find("--bogus") != std::string::npos);
    CHECK(run({}).code == cli::kExitUserError);
    CHECK(run({"frobnicate"}).code == cli::kExitUserError);
    CHECK(run({"train", "--dataset", "nope", "--iters", "1"}).code == cli::kExitUserError);
    CHECK(run({"train", "--size", "32", "--iters", "1"}).code == cli::kExitUserError);
    CHECK(run({"sample", "--out", "x"}).code == cli::kExitUserError);
    CHECK(run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("train smoke run") {
    TempDir dir("cli_train");
    auto r = run({"train", "--dataset", "checkerboard", "--n", "16", "--size", "64", "--iters", "10", "--seed", "1",
                  "--batch", "4", "--out", (dir / "run").string()});
    REQUIRE(r.code == 0);
    auto rows = lines(r.out);
    REQUIRE(rows.size() == 11);
    CHECK(rows[0] == "iteration,l_d,l_g,l_d_hf,l_g_hf,l_align,l_recons");
    for (int i = 1; i <= 10; ++i) CHECK(split(rows[i])[0] == std::to_string(i));
    CHECK(std::filesystem::exists(dir / "run" / "checkpoint.fgc"));
    CHECK(std::filesystem::exists(dir / "run" / "config.json"));
    CHECK(lines(std::string(read_bytes(dir / "run" / "log.csv").data(), read_bytes(dir / "run" / "log.csv").size())) ==
          rows);
    // Resolved configuration goes to stderr only.
    CHECK(r.err.find("# batch=4") != std::string::npos);
    CHECK(r.err.find("\"iterations\"") != std::string::npos);
}

TEST_CASE("train ablation flags zero the frequency terms") {
    auto r = run({"train", "--iters", "3", "--batch", "2", "--n", "4", "--no-hfd", "--no-hfa", "--no-fsc"});
    REQUIRE(r.code == 0);
    auto rows = lines(r.out);
    REQUIRE(rows.size() == 4);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        auto f = split(rows[i]);
        CHECK(f[3] == "0");
        CHECK(f[4] == "0");
        CHECK(f[5] == "0");
        CHECK(f[1] != "0");
    }
}

TEST_CASE("identical train invocations give identical logs") {
    const std::vector<std::string> args = {"train", "--iters", "4", "--batch", "2", "--n", "4", "--seed", "9"};
    auto a = run(args), b = run(args);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    auto c = run({"train", "--iters", "4", "--batch", "2", "--n", "4", "--seed", "10"});
    CHECK(c.out != a.out);
}

TEST_CASE("config file values sit under flags") {
    TempDir dir("cli_cfg");
    const auto cfg = dir / "run.toml";
    std::ofstream(cfg) << "# flat schema\niters = 3\nbatch = 2\nn = 4\nseed = 5\nno_hfa = true\nlr = 1e-4\n";
    auto r = run({"train", "--config", cfg.string(), "--iters", "2"});
    REQUIRE(r.code == 0);
    CHECK(lines(r.out).size() == 3);
    CHECK(r.err.find("# seed=5") != std::string::npos);
    CHECK(r.err.find("# iters=2") != std::string::npos);
    CHECK(r.err.find("# lr=0.0001") != std::string::npos);
    for (std::size_t i = 1; i < 3; ++i) CHECK(split(lines(r.out)[i])[5] == "0");

    std::ofstream(dir / "bad_key.toml") << "levels = 2\n";
    auto bad = run({"train", "--config", (dir / "bad_key.toml").string()});
    CHECK(bad.code == cli::kExitUserError);
    CHECK(bad.err.find("levels") != std::string::npos);
    std::ofstream(dir / "bad_type.toml") << "iters = \"many\"\n";
    CHECK(run({"train", "--config", (dir / "bad_type.toml").string()}).code == cli::kExitUserError);
    std::ofstream(dir / "table.toml") << "[train]\niters = 1\n";
    CHECK(run({"train", "--config", (dir / "table.toml").string()}).code == cli::kExitUserError);
    CHECK(run({"train", "--config", (dir / "missing.toml").string()}).code == cli::kExitUserError);
}

TEST_CASE("train resume continues the log") {
    TempDir dir("cli_resume");
    const auto out = (dir / "run").string();
    const std::vector<std::string> base = {"train", "--batch", "2", "--n", "4", "--seed", "3"};
    auto full_args = base;
    full_args.insert(full_args.end(), {"--iters", "4"});
    auto full = run(full_args);
    auto first_args = base;
    first_args.insert(first_args.end(), {"--iters", "2", "--out", out});
    REQUIRE(run(first_args).code == 0);
    auto rest = run({"train", "--iters", "4", "--out", out, "--checkpoint", out + "/checkpoint.fgc"});
    REQUIRE(rest.code == 0);
    auto want = lines(full.out);
    auto got = lines(rest.out);
    REQUIRE(got.size() == 3);
    CHECK(got[1] == want[3]);
    CHECK(got[2] == want[4]);
    CHECK(run({"train", "--iters", "5", "--seed", "4", "--checkpoint", out + "/checkpoint.fgc"}).code ==
          cli::kExitUserError);
}

TEST_CASE("sample subcommand") {
    TempDir dir("cli_sample");
    const auto run_dir = (dir / "run").string();
    REQUIRE(run({"train", "--iters", "1", "--batch", "2", "--n", "4", "--out", run_dir}).code == 0);
    const auto ckpt = run_dir + "/checkpoint.fgc";

    auto none = run({"sample", "--checkpoint", ckpt, "--n", "0", "--out", (dir / "none").string()});
    CHECK(none.code == 0);
    CHECK(key_values(none.out)["count"] == "0");
    CHECK_FALSE(std::filesystem::exists(dir / "none"));

    REQUIRE(run({"sample", "--checkpoint", ckpt, "--n", "2", "--seed", "4", "--out", (dir / "a").string()}).code == 0);
    REQUIRE(run({"sample", "--checkpoint", ckpt, "--n", "2", "--seed", "4", "--out", (dir / "b").string()}).code == 0);
    for (const char* f : {"sample_00000.png", "sample_00001.png"}) CHECK(read_bytes(dir / "a" / f) == read_bytes(dir / "b" / f));
    auto png = io::read_png(dir / "a" / "sample_00000.png");
    CHECK(png.width == 64);
    CHECK(png.height == 64);

    CHECK(run({"sample", "--checkpoint", (dir / "nope.fgc").string(), "--n", "1", "--out", (dir / "c").string()})
              .code == cli::kExitUserError);
}

TEST_CASE("decompose a constant image") {
    TempDir dir("cli_dec_const");
    write_rgb(dir / "c.png", 8, 6, [](int, int, int c) { return static_cast<std::uint8_t>(40 + 50 * c); });
    auto r = run({"decompose", (dir / "c.png").string(), "--levels", "1", "--out", (dir / "out").string()});
    REQUIRE(r.code == 0);
    int pngs = 0, csvs = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir / "out")) {
        pngs += e.path().extension() == ".png";
        csvs += e.path().extension() == ".csv";
    }
    CHECK(pngs == 4);
    CHECK(csvs == 4);
    CHECK(lines(r.out).size() == 5);
    for (const char* band : {"LH", "HL", "HH"}) {
        auto img = io::read_png(dir / "out" / (std::string("level1_") + band + ".png"));
        CHECK(img.width == 4);
        CHECK(img.height == 3);
        for (auto p : img.pixels) CHECK(p == 128);
        auto g = read_band(dir / "out" / (std::string("level1_") + band + ".csv"), 3, 3, 4);
        for (const auto& ch : g)
            for (const auto& row : ch)
                for (double v : row) CHECK(v == 0.0);
    }
}

TEST_CASE("decompose bands reconstruct the image") {
    TempDir dir("cli_dec_round");
    Rng rng(12);
    write_rgb(dir / "x.png", 16, 8, [&](int, int, int) { return static_cast<std::uint8_t>(rng.uniform_int(0, 255)); });
    auto r = run({"decompose", (dir / "x.png").string(), "--levels", "2", "--out", (dir / "out").string()});
    REQUIRE(r.code == 0);
    CHECK(lines(r.out).size() == 8);

    // Inverse Haar from the CSVs alone: x[2i+a][2j+b] = Σ_band k_band[a][b] · coef.
    const double s = 1.0 / std::sqrt(2.0);
    const double L[2] = {s, s}, H[2] = {-s, s};
    auto inverse = [&](const std::string& level, std::vector<std::vector<std::vector<double>>> ll, int h, int w) {
        auto lh = read_band(dir / "out" / (level + "_LH.csv"), 3, h, w);
        auto hl = read_band(dir / "out" / (level + "_HL.csv"), 3, h, w);
        auto hh = read_band(dir / "out" / (level + "_HH.csv"), 3, h, w);
        std::vector<std::vector<std::vector<double>>> x(3, std::vector<std::vector<double>>(2 * h, std::vector<double>(2 * w)));
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                    for (int a = 0; a < 2; ++a)
                        for (int b = 0; b < 2; ++b)
                            x[c][2 * i + a][2 * j + b] = L[a] * L[b] * ll[c][i][j] + L[a] * H[b] * lh[c][i][j] +
                                                         H[a] * L[b] * hl[c][i][j] + H[a] * H[b] * hh[c][i][j];
        return x;
    };
    auto ll2 = read_band(dir / "out" / "level2_LL.csv", 3, 2, 4);
    auto ll1 = inverse("level2", ll2, 2, 4);
    auto x = inverse("level1", ll1, 4, 8);

    auto img = io::read_png(dir / "x.png");
    double worst = 0.0;
    for (int y = 0; y < 8; ++y)
        for (int xx = 0; xx < 16; ++xx)
            for (int c = 0; c < 3; ++c)
                worst = std::max(worst, std::fabs(x[c][y][xx] - io::from_byte(img.pixels[(y * 16 + xx) * 3 + c])));
    CHECK(worst < 1e-5);
}

TEST_CASE("decompose rejects odd sizes and missing files") {
    TempDir dir("cli_dec_bad");
    write_rgb(dir / "odd.png", 7, 6, [](int, int, int) { return 9; });
    CHECK(run({"decompose", (dir / "odd.png").string(), "--out", (dir / "o").string()}).code == cli::kExitUserError);
    write_rgb(dir / "six.png", 6, 6, [](int, int, int) { return 9; });
    CHECK(run({"decompose", (dir / "six.png").string(), "--levels", "2", "--out", (dir / "o").string()}).code ==
          cli::kExitUserError);
    CHECK(run({"decompose", (dir / "none.png").string(), "--out", (dir / "o").string()}).code == cli::kExitUserError);
}

TEST_CASE("spectrum and compare") {
    TempDir dir("cli_spec");
    std::filesystem::create_directories(dir / "flat");
    std::filesystem::create_directories(dir / "wave");
    for (int i = 0; i < 3; ++i) {
        char name[16];
        std::snprintf(name, sizeof name, "%02d.png", i);
        write_rgb(dir / "flat" / name, 32, 32, [](int, int, int) { return std::uint8_t{128}; });
    }
    // Period-4 cosines around byte 128 are exact in 8 bits, so the corpus has
    // power only at DC and at k = 32 / 4 = 8, with the same DC as the flat corpus.
    const int k = 8;
    const std::uint8_t levels[4] = {254, 128, 2, 128};
    for (int i = 0; i < 3; ++i)
        write_rgb(dir / "wave" / ("w" + std::to_string(i) + ".png"), 32, 32,
                  [&](int, int x, int) { return levels[(x + i) % 4]; });
    auto flat = run({"spectrum", (dir / "flat").string(), "--size", "32", "--out", (dir / "sf").string()});
    REQUIRE(flat.code == 0);
    auto rows = lines(flat.out);
    REQUIRE(rows.size() == 18);
    CHECK(rows[0] == "bin,mean,variance");
    CHECK(std::stod(split(rows[1])[1]) > -10.0);
    for (std::size_t b = 2; b < rows.size(); ++b) CHECK(split(rows[b])[1] == "-10.0");
    for (const char* f : {"spectrum.png", "spectrum.csv", "profile.csv", "slice.csv"})
        CHECK(std::filesystem::exists(dir / "sf" / f));

    auto same = run({"compare", (dir / "wave").string(), (dir / "wave").string(), "--size", "32"});
    REQUIRE(same.code == 0);
    CHECK(key_values(same.out)["distance"] == "0.0");
    CHECK(lines(same.out)[0] == "distance=0.0");

    auto diff = run({"compare", (dir / "wave").string(), (dir / "flat").string(), "--size", "32", "--out",
                     (dir / "cmp").string()});
    REQUIRE(diff.code == 0);
    CHECK(std::stod(key_values(diff.out)["distance"]) > 0.0);
    std::ifstream gap(dir / "cmp" / "gap.csv");
    std::string l;
    std::getline(gap, l);
    int best = -1;
    double top = -1.0;
    while (std::getline(gap, l)) {
        auto f = split(l);
        if (std::stod(f[1]) > top) top = std::stod(f[1]), best = std::stoi(f[0]);
    }
    CHECK(best == k);

    CHECK(run({"compare", (dir / "wave").string(), (dir / "missing").string()}).code == cli::kExitUserError);
    CHECK(run({"compare", (dir / "wave").string()}).code == cli::kExitUserError);
}

TEST_CASE("verify") {
    auto ok = run({"verify", "--steps", "5"});
    CHECK(ok.code == 0);
    auto rows = lines(ok.out);
    REQUIRE(rows.size() >= 6);
    std::map<std::string, std::string> status;
    for (std::size_t i = 1; i < rows.size(); ++i) status[split(rows[i])[0]] = split(rows[i])[1];
    for (const char* suite : {"reconstruction", "parseval", "adjoint", "gradcheck", "baseline-equivalence"})
        CHECK(status[suite] == "pass");

    auto bad = run({"verify", "--steps", "1", "--inject-kernel-fault"});
    CHECK(bad.code != 0);
    CHECK(bad.out.find("reconstruction,fail") != std::string::npos);
    CHECK(bad.err.find("reconstruction") != std::string::npos);
}
