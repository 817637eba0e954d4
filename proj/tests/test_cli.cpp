#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "flowtrack/mot_io.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using namespace flowtrack;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(FLOWTRACK_CLI_PATH) + " " + args + " 2>&1";
    std::array<char, 4096> buf{};
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (fgets(buf.data(), buf.size(), pipe))
        r.output += buf.data();
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("flowtrack_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

// 3-frame single-track toy files
void write_toy(const TempDir& dir) {
    std::ofstream det(dir.file("det.txt"));
    std::ofstream gt(dir.file("gt.txt"));
    for (int f = 1; f <= 3; ++f) {
        det << f << ",-1," << 10 + 2 * f << ",20,30,60,0.9,-1,-1,-1\n";
        gt << f << ",1," << 10 + 2 * f << ",20,30,60,1,-1,-1,-1\n";
    }
}

int count_lines(const std::string& path) {
    std::ifstream in(path);
    int n = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty())
            ++n;
    return n;
}

void write_sequence_files(const Sequence& seq, const std::string& det_path,
                          const std::string& gt_path) {
    std::ofstream det(det_path);
    for (const auto& d : seq.detections)
        det << d.frame << ",-1," << io::format_real(d.box.left) << ','
            << io::format_real(d.box.top) << ',' << io::format_real(d.box.width) << ','
            << io::format_real(d.box.height) << ',' << io::format_real(d.score) << ",-1,-1,-1\n";
    std::ofstream gt(gt_path);
    for (const auto& e : seq.ground_truth)
        gt << e.det.frame << ',' << e.track_id << ',' << io::format_real(e.det.box.left) << ','
           << io::format_real(e.det.box.top) << ',' << io::format_real(e.det.box.width) << ','
           << io::format_real(e.det.box.height) << ",1,-1,-1,-1\n";
}

}  // namespace

TEST_CASE("pairs command") {
    TempDir dir;
    write_toy(dir);

    SUBCASE("3-frame track gives 3 positive rows") {
        auto r = run_cli("pairs --det " + dir.file("det.txt") + " --gt " + dir.file("gt.txt") +
                         " --out " + dir.file("pairs.csv"));
        CHECK(r.exit_code == 0);
        CHECK(count_lines(dir.file("pairs.csv")) == 3);
    }
    SUBCASE("--rewind 1 gives 2 rows") {
        auto r = run_cli("pairs --det " + dir.file("det.txt") + " --gt " + dir.file("gt.txt") +
                         " --out " + dir.file("pairs.csv") + " --rewind 1");
        CHECK(r.exit_code == 0);
        CHECK(count_lines(dir.file("pairs.csv")) == 2);
    }
    SUBCASE("missing --gt is a usage error") {
        auto r = run_cli("pairs --det " + dir.file("det.txt") + " --out " + dir.file("p.csv"));
        CHECK(r.exit_code == 2);
    }
    SUBCASE("unreadable input is a data error") {
        auto r = run_cli("pairs --det " + dir.file("absent.txt") + " --gt " +
                         dir.file("gt.txt") + " --out " + dir.file("p.csv"));
        CHECK(r.exit_code == 1);
    }
}

TEST_CASE("train command") {
    TempDir dir;
    // separable synthetic pairs: positives move slowly, negatives jump
    auto write_pairs = [&](const std::string& name, int offset) {
        std::ofstream out(dir.file(name));
        for (int k = 0; k < 60; ++k) {
            const double v = 0.1 * ((k + offset) % 7);
            out << "1,1,0,0," << v << "," << v << "," << v << "," << v << "\n";
            out << "0,1,0.5,0.5," << 80 + v << "," << 80 + v << "," << 80 + v << "," << 80 + v
                << "\n";
        }
    };
    write_pairs("a.csv", 0);
    write_pairs("b.csv", 3);

    SUBCASE("separable data trains to AUC >= 0.99") {
        auto r = run_cli("train --pairs " + dir.file("a.csv") + " " + dir.file("b.csv") +
                         " --out " + dir.file("model.txt") + " --trees 50");
        CHECK(r.exit_code == 0);
        CHECK(r.output.find("training AUC: 1") != std::string::npos);
        std::ifstream in(dir.file("model.txt"));
        auto model = io::read_model(in);
        CHECK(model.feature_count == 6);
        CHECK(model.trees.size() == 50);
    }
    SUBCASE("--trees 0 writes a constant model") {
        auto r = run_cli("train --pairs " + dir.file("a.csv") + " --out " +
                         dir.file("model.txt") + " --trees 0");
        CHECK(r.exit_code == 0);
        std::ifstream in(dir.file("model.txt"));
        CHECK(io::read_model(in).trees.empty());
    }
    SUBCASE("--stacked prints a per-fold table") {
        auto r = run_cli("train --pairs " + dir.file("a.csv") + " " + dir.file("b.csv") +
                         " --out " + dir.file("model.txt") + " --trees 20 --stacked");
        CHECK(r.exit_code == 0);
        CHECK(r.output.find("fold,auc") != std::string::npos);
        CHECK(r.output.find("out-of-fold AUC") != std::string::npos);
    }
}

TEST_CASE("track command") {
    TempDir dir;
    synth::SynthConfig scfg;
    scfg.n_tracks = 3;
    scfg.n_frames = 12;
    scfg.seed = 3;
    auto synthetic = synth::make_sequence(scfg);
    write_sequence_files(synthetic.seq, dir.file("det.txt"), dir.file("gt.txt"));

    SUBCASE("perfect score file recovers the tracks") {
        std::ofstream scores(dir.file("scores.csv"));
        const auto& dets = synthetic.seq.detections;
        for (size_t i = 0; i < dets.size(); ++i)
            for (size_t j = 0; j < dets.size(); ++j) {
                if (dets[j].frame <= dets[i].frame || dets[j].frame - dets[i].frame > 15)
                    continue;
                const int ia = synthetic.identity(dets[i]);
                const int ib = synthetic.identity(dets[j]);
                scores << dets[i].frame << ',' << dets[i].source_index << ',' << dets[j].frame
                       << ',' << dets[j].source_index << ','
                       << ((ia >= 0 && ia == ib) ? "1" : "0") << "\n";
            }
        scores.close();
        auto r = run_cli("track --det " + dir.file("det.txt") + " --scores " +
                         dir.file("scores.csv") + " --out " + dir.file("res.txt") +
                         " --cinout 0.6");
        CHECK(r.exit_code == 0);
        CHECK(r.output.find("3 trajectories") != std::string::npos);

        auto ev = run_cli("eval --gt " + dir.file("gt.txt") + " --res " + dir.file("res.txt"));
        CHECK(ev.exit_code == 0);
        CHECK(ev.output.find("id_switches,0") != std::string::npos);
    }
    SUBCASE("lp2d baseline writes a valid results file") {
        auto r = run_cli("track --det " + dir.file("det.txt") + " --baseline lp2d --out " +
                         dir.file("res.txt") + " --cinout 0.6");
        CHECK(r.exit_code == 0);
        std::ifstream in(dir.file("res.txt"));
        CHECK_NOTHROW(io::parse_mot_file(in, io::MotKind::results));
    }
    SUBCASE("out-of-range threshold is a usage error") {
        auto r = run_cli("track --det " + dir.file("det.txt") + " --baseline lp2d --out " +
                         dir.file("res.txt") + " --vlink 1.5");
        CHECK(r.exit_code == 2);
    }
    SUBCASE("scorer flags are mutually exclusive") {
        auto r = run_cli("track --det " + dir.file("det.txt") + " --baseline lp2d --scores x" +
                         " --out " + dir.file("res.txt"));
        CHECK(r.exit_code == 2);
    }
    SUBCASE("identical invocations produce byte-identical results") {
        auto r1 = run_cli("track --det " + dir.file("det.txt") + " --baseline lp2d --out " +
                          dir.file("res1.txt") + " --cinout 0.6");
        auto r2 = run_cli("track --det " + dir.file("det.txt") + " --baseline lp2d --out " +
                          dir.file("res2.txt") + " --cinout 0.6");
        CHECK(r1.exit_code == 0);
        CHECK(r2.exit_code == 0);
        std::ifstream a(dir.file("res1.txt")), b(dir.file("res2.txt"));
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        CHECK(sa.str() == sb.str());
        CHECK(!sa.str().empty());
    }
}

TEST_CASE("tune command") {
    TempDir dir;
    synth::SynthConfig scfg;
    scfg.n_tracks = 2;
    scfg.n_frames = 10;
    scfg.seed = 8;
    auto synthetic = synth::make_sequence(scfg);
    fs::create_directories(dir.path / "seq01" / "det");
    fs::create_directories(dir.path / "seq01" / "gt");
    write_sequence_files(synthetic.seq, (dir.path / "seq01" / "det" / "det.txt").string(),
                         (dir.path / "seq01" / "gt" / "gt.txt").string());

    auto r = run_cli("tune --train-dir " + dir.path.string() +
                     " --baseline lp2d --grid cinout=0.4:0.8:0.2");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("vdet,vlink,cinout,mean_mota") != std::string::npos);
    CHECK(r.output.find("best:") != std::string::npos);

    auto bad = run_cli("tune --train-dir " + dir.path.string() + " --baseline lp2d --grid q=1");
    CHECK(bad.exit_code == 1);
}
