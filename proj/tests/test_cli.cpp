#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "acf/cli/commands.hpp"
#include "acf/cli/run_config.hpp"
#include "acf/data/dataset.hpp"
#include "acf/data/image_io.hpp"
#include "acf/error.hpp"
#include "acf/report.hpp"
#include "support.hpp"

using namespace acf;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::vector<double> csv_numbers(const std::string& line) {
  std::vector<double> v;
  std::istringstream in(line);
  for (std::string cell; std::getline(in, cell, ',');) v.push_back(std::stod(cell));
  return v;
}

const char* kTinyConfig =
    "# small network for quick runs\n"
    "feature_channels=4,4\n"
    "aggregation_channels=3\n"
    "cenet_channels=3\n"
    "max_disp=8\n"
    "epochs=2\n"
    "batch_size=2\n";

// Small dataset plus a trained run directory, built once per mode.
struct Fixture {
  fs::path root, data, run;

  explicit Fixture(const std::string& name, const std::string& mode = "acf-adaptive") {
    root = acf::test::scratch_dir("cli_" + name);
    data = root / "data";
    run = root / "run";
    REQUIRE(cli({"gen", "--out", data.string(), "--count", "3", "--height", "16", "--width", "24", "--max-disp", "8",
                 "--seed", "7", "--shapes", "2"})
                .code == 0);
    write_file(root / "cfg.txt", kTinyConfig);
    REQUIRE(cli({"train", "--config", (root / "cfg.txt").string(), "--data", data.string(), "--out", run.string(),
                 "--mode", mode})
                .code == 0);
  }
};

}  // namespace

TEST_SUITE("gen") {
  TEST_CASE("same flags twice give byte-identical directories") {
    const fs::path a = acf::test::scratch_dir("cli_gen_a"), b = acf::test::scratch_dir("cli_gen_b");
    for (const fs::path& dir : {a, b})
      REQUIRE(cli({"gen", "--out", dir.string(), "--count", "2", "--seed", "7", "--height", "16", "--width", "32",
                   "--max-disp", "8", "--force"})
                  .code == 0);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
      ++files;
      CHECK(acf::test::files_identical(entry.path(), b / entry.path().filename()));
    }
    CHECK(files == 11);
  }

  TEST_CASE("disparity range wider than the image is rejected") {
    const Run r = cli({"gen", "--out", (acf::test::scratch_dir("cli_gen_bad") / "x").string(), "--count", "1",
                       "--max-disp", "32", "--width", "16"});
    CHECK(r.code == 1);
    CHECK(r.err.rfind("ERROR domain:", 0) == 0);
  }

  TEST_CASE("no shapes leaves only the border band occluded") {
    const fs::path dir = acf::test::scratch_dir("cli_gen_plane");
    const Run r = cli({"gen", "--out", dir.string(), "--count", "1", "--height", "10", "--width", "40", "--max-disp",
                       "8", "--shapes", "0", "--bg-disp", "3:3", "--force"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("occluded_fraction=0.075") != std::string::npos);  // 3 of 40 columns
  }

  TEST_CASE("existing output needs force") {
    const fs::path dir = acf::test::scratch_dir("cli_gen_force");
    const std::vector<std::string> args{"gen", "--out", dir.string(), "--count", "1", "--height", "8", "--width",
                                        "16", "--max-disp", "4"};
    CHECK(cli(args).code == 0);
    const Run again = cli(args);
    CHECK(again.code == 2);
    CHECK(again.err.find("--force") != std::string::npos);
  }
}

TEST_SUITE("train") {
  TEST_CASE("regression-only logs zero focal and confidence columns") {
    Fixture fx("reg", "regression-only");
    const std::vector<std::string> lines = split_lines(read_file(fx.run / "loss.csv"));
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "epoch,L_SF,L_reg,L_conf,total,val_epe");
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const std::vector<double> v = csv_numbers(lines[i]);
      CHECK(v[1] == 0.0);
      CHECK(v[3] == 0.0);
      CHECK(v[2] > 0.0);
    }
    CHECK(read_file(fx.run / "config.txt") == kTinyConfig);
    const RunConfig resolved = parse_run_config(read_file(fx.run / "config.resolved.txt"));
    CHECK(resolved.model.mode == TrainingMode::kRegressionOnly);
    CHECK(resolved.model.epochs == 2);
  }

  TEST_CASE("same seed and config give identical loss logs") {
    Fixture a("det_a"), b("det_b");
    CHECK(read_file(a.run / "loss.csv") == read_file(b.run / "loss.csv"));
    CHECK(acf::test::files_identical(a.run / "model.ckpt", b.run / "model.ckpt"));
  }

  TEST_CASE("uniform mode reports the configured sigma") {
    Fixture fx("uniform", "acf-uniform");
    const fs::path left = fx.data / "000000_left.pgm", right = fx.data / "000000_right.pgm";
    const Run r = cli({"inspect", "--model", fx.run.string(), "--left", left.string(), "--right", right.string(),
                       "--pixel", "12,8", "--out", (fx.root / "i.csv").string()});
    REQUIRE(r.code == 0);
    CHECK(read_file(fx.root / "i.csv").find("# sigma=1.2000000476837158\n") != std::string::npos);
  }

  TEST_CASE("unknown config key is rejected naming key and line") {
    const fs::path root = acf::test::scratch_dir("cli_badkey");
    write_file(root / "cfg.txt", "epochs=1\n# comment\nlearning_rate=0.1\n");
    const Run r = cli({"train", "--config", (root / "cfg.txt").string(), "--data", root.string(), "--out",
                       (root / "run").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("learning_rate") != std::string::npos);
    CHECK(r.err.find("line 3") != std::string::npos);
    CHECK(r.err.rfind("ERROR config:", 0) == 0);
  }

  TEST_CASE("every documented key round-trips through the resolved text") {
    const RunConfig cfg = parse_run_config("");
    const std::string text = to_run_config_text(cfg);
    for (const KeyDoc& doc : run_config_documentation()) {
      CHECK(text.find(doc.key + "=") != std::string::npos);
      CHECK_FALSE(doc.meaning.empty());
    }
    CHECK(to_run_config_text(parse_run_config(text)) == text);
  }
}

TEST_SUITE("eval") {
  TEST_CASE("ground truth as prediction gives zero error, three splits, stable bytes") {
    const fs::path root = acf::test::scratch_dir("cli_eval_perfect");
    REQUIRE(cli({"gen", "--out", (root / "data").string(), "--count", "2", "--height", "16", "--width", "24",
                 "--max-disp", "8", "--seed", "3"})
                .code == 0);
    fs::create_directories(root / "pred");
    for (const ManifestEntry& e : read_manifest(root / "data").entries)
      fs::copy_file(root / "data" / e.dgt, root / "pred" / e.dgt.filename());
    const std::vector<std::string> args{"eval", "--pred", (root / "pred").string(), "--data", (root / "data").string(),
                                        "--out", (root / "m.csv").string()};
    REQUIRE(cli(args).code == 0);
    const std::string first = read_file(root / "m.csv");
    const std::vector<MetricReport> reports = parse_metrics_csv(first);
    REQUIRE(reports.size() == 3);
    for (const MetricReport& r : reports) {
      CHECK(r.epe == 0.0);
      CHECK(r.d1 == 0.0);
      for (const double k : r.kpe) CHECK(k == 0.0);
    }
    CHECK(reports[0].pixels == reports[1].pixels + reports[2].pixels);
    REQUIRE(cli(args).code == 0);
    CHECK(read_file(root / "m.csv") == first);
  }

  TEST_CASE("trained model rows satisfy the weighted-EPE identity") {
    Fixture fx("eval");
    const Run r = cli({"eval", "--model", (fx.run / "model.ckpt").string(), "--data", fx.data.string(), "--out",
                       (fx.root / "m.csv").string()});
    REQUIRE(r.code == 0);
    const std::vector<MetricReport> rep = parse_metrics_csv(read_file(fx.root / "m.csv"));
    REQUIRE(rep.size() == 3);
    const double lhs = rep[0].epe * static_cast<double>(rep[0].pixels);
    const double rhs = rep[1].epe * static_cast<double>(rep[1].pixels) + rep[2].epe * static_cast<double>(rep[2].pixels);
    // Values pass through six decimals in the CSV.
    CHECK(std::abs(lhs - rhs) <= 1e-6 * static_cast<double>(rep[0].pixels));
  }

  TEST_CASE("missing checkpoint is rejected") {
    const fs::path root = acf::test::scratch_dir("cli_eval_missing");
    const Run r = cli({"eval", "--model", (root / "none.ckpt").string(), "--data", root.string(), "--out",
                       (root / "m.csv").string()});
    CHECK(r.code == 1);
    CHECK(r.err.rfind("ERROR ", 0) == 0);
  }
}

TEST_SUITE("sparsify and inspect") {
  TEST_CASE("sparsification file properties") {
    Fixture fx("sparsify");
    const Run r = cli({"sparsify", "--model", fx.run.string(), "--data", fx.data.string(), "--out",
                       (fx.root / "s.csv").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("model_halving_fraction=") != std::string::npos);
    const std::vector<std::string> lines = split_lines(read_file(fx.root / "s.csv"));
    REQUIRE(lines.size() == 97);
    CHECK(lines[0] == "fraction,model,oracle,random");
    CHECK(lines[1] == "0.000000,1.000000,1.000000,1.000000");
    double prev_oracle = 2.0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const std::vector<double> v = csv_numbers(lines[i]);
      CHECK(v[2] <= prev_oracle);
      CHECK(v[1] >= v[2]);
      prev_oracle = v[2];
    }
    const Run bad = cli({"sparsify", "--model", fx.run.string(), "--data", fx.data.string(), "--out",
                         (fx.root / "t.csv").string(), "--fractions", "0:0.5:0"});
    CHECK(bad.code != 0);
    CHECK(bad.err.rfind("ERROR usage:", 0) == 0);
  }

  TEST_CASE("inspect distribution properties") {
    Fixture fx("inspect");
    const fs::path left = fx.data / "000001_left.pgm", right = fx.data / "000001_right.pgm";
    const fs::path dgt = fx.data / "000001_disp.pfm";
    const Tensor<double> gt = read_pfm(dgt);
    const Run r = cli({"inspect", "--model", fx.run.string(), "--left", left.string(), "--right", right.string(),
                       "--pixel", "15,6", "--dgt", dgt.string(), "--out", (fx.root / "i.csv").string()});
    REQUIRE(r.code == 0);
    double dhat = -1.0, prob_sum = 0.0, weighted = 0.0, best = -1.0;
    std::size_t rows = 0, peak = 0;
    for (const std::string& line : split_lines(read_file(fx.root / "i.csv"))) {
      if (line.rfind("# dhat=", 0) == 0) dhat = std::stod(line.substr(7));
      if (line.empty() || line[0] == '#' || line[0] == 'd') continue;
      const std::vector<double> v = csv_numbers(line);
      prob_sum += v[2];
      weighted += v[0] * v[2];
      if (v[3] > best) {
        best = v[3];
        peak = static_cast<std::size_t>(v[0]);
      }
      ++rows;
    }
    CHECK(rows == 8);
    CHECK(std::abs(prob_sum - 1.0) <= 1e-6);
    CHECK(std::abs(dhat - weighted) <= 1e-6);
    CHECK(static_cast<double>(peak) == std::round(gt.at(6, 15)));

    const Run out_of_bounds = cli({"inspect", "--model", fx.run.string(), "--left", left.string(), "--right",
                                   right.string(), "--pixel", "24,0", "--out", (fx.root / "j.csv").string()});
    CHECK(out_of_bounds.code == 1);
  }
}

TEST_SUITE("surface") {
  TEST_CASE("usage errors and help") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"gen", "--count", "1"}).code == 2);
    CHECK(cli({"--help"}).code == 0);
    const Run bad_mode = cli({"train", "--data", "x", "--out", "y", "--mode", "bogus"});
    CHECK(bad_mode.code != 0);
    CHECK(bad_mode.err.rfind("ERROR ", 0) == 0);
  }
}
