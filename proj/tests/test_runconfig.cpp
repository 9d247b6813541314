#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "sncpd/errors.hpp"
#include "sncpd/runconfig.hpp"

using namespace sncpd;

namespace {

std::filesystem::path temp_cfg(const char* name, const std::string& body) {
  auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << body;
  return path;
}

}  // namespace

TEST_CASE("defaults validate and describe a conv sn-ts2vec run") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.spectral_norm());
  CHECK(cfg.objective() == Objective::Contrastive);
  CHECK(cfg.statistic_kind() == Statistic::Cosine);
  CHECK(cfg.resolved_mode() == "vector");

  const EncoderSpec spec = cfg.encoder_spec(5);
  CHECK(spec.input_dim == 5);
  CHECK(spec.blocks.size() == cfg.depth);
  CHECK(spec.blocks[0].kind == BlockKind::Conv);
  CHECK(spec.blocks[0].dilation == 1);
  CHECK(spec.blocks[3].dilation == 8);
  CHECK(spec.blocks[4].dilation == 1);  // dilations cycle
  CHECK(spec.spectral_norm);
  CHECK(spec.cap == doctest::Approx(0.9));
}

TEST_CASE("file parsing handles comments, blanks and whitespace") {
  auto path = temp_cfg("runconfig_parse.cfg",
                       "# comment\n"
                       "\n"
                       "  dims = 7  \n"
                       "model=ts-byol\n"
                       "margins = 10, 20,30\n"
                       "block = dense\n"
                       "svg = off\n");
  RunConfig cfg = RunConfig::from_file(path.string());
  CHECK(cfg.dims == 7);
  CHECK(cfg.model == "ts-byol");
  CHECK_FALSE(cfg.spectral_norm());
  CHECK(cfg.objective() == Objective::Bootstrap);
  CHECK(cfg.margins == std::vector<std::size_t>{10, 20, 30});
  CHECK(cfg.encoder_spec(3).blocks[0].kind == BlockKind::Dense);
  CHECK_FALSE(cfg.svg);
  std::filesystem::remove(path);
}

TEST_CASE("file parsing failures carry file and line") {
  auto bad = temp_cfg("runconfig_bad.cfg", "dims = 3\nnot a pair\n");
  CHECK_THROWS_AS(RunConfig::from_file(bad.string()), ParseError);
  try {
    RunConfig::from_file(bad.string());
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
  std::filesystem::remove(bad);

  auto unknown = temp_cfg("runconfig_unknown.cfg", "widnow = 5\n");
  CHECK_THROWS_AS(RunConfig::from_file(unknown.string()), ParseError);
  std::filesystem::remove(unknown);

  auto junk = temp_cfg("runconfig_junk.cfg", "dims = five\n");
  CHECK_THROWS_AS(RunConfig::from_file(junk.string()), ParseError);
  std::filesystem::remove(junk);

  CHECK_THROWS_AS(RunConfig::from_file("/nonexistent/nowhere.cfg"), IoError);
}

TEST_CASE("overrides win over file values") {
  auto path = temp_cfg("runconfig_prec.cfg", "window = 40\nseed = 3\n");
  RunConfig cfg = RunConfig::from_file(path.string());
  cfg.apply({{"window", "60"}, {"statistic", "mmd"}});
  CHECK(cfg.window == 60);   // flag beats file
  CHECK(cfg.seed == 3);      // file beats default
  CHECK(cfg.statistic == "mmd");
  CHECK(cfg.resolved_mode() == "sequence");
  std::filesystem::remove(path);
}

TEST_CASE("unknown override key throws before any compute") {
  RunConfig cfg;
  CHECK_THROWS_AS(cfg.apply({{"wnidow", "60"}}), ConfigError);
  CHECK_THROWS_AS(cfg.set("margins", ""), ConfigError);
  CHECK_THROWS_AS(cfg.set("normalize", "perhaps"), ConfigError);
}

TEST_CASE("validation rejects inconsistent setups") {
  auto expect_reject = [](auto&& mutate) {
    RunConfig cfg;
    mutate(cfg);
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  };
  expect_reject([](RunConfig& c) { c.data = "parquet"; });
  expect_reject([](RunConfig& c) { c.data = "csv"; });  // missing csv_path
  expect_reject([](RunConfig& c) { c.model = "resnet"; });
  expect_reject([](RunConfig& c) { c.block = "attention"; });
  expect_reject([](RunConfig& c) { c.kernel = 4; });
  expect_reject([](RunConfig& c) { c.split_val = 0.5; });  // splits no longer sum to 1
  expect_reject([](RunConfig& c) { c.statistic = "energy"; });
  expect_reject([](RunConfig& c) { c.dropout = 1.0; });
  expect_reject([](RunConfig& c) { c.margins.clear(); });
  expect_reject([](RunConfig& c) { c.lr = 0.0; });

  // statistic/mode mismatch is a usage error, both ways around
  expect_reject([](RunConfig& c) {
    c.statistic = "mmd";
    c.mode = "vector";
  });
  expect_reject([](RunConfig& c) {
    c.statistic = "cos";
    c.mode = "sequence";
  });
}

TEST_CASE("canonical form is order independent and hashes stably") {
  auto a = temp_cfg("runconfig_ha.cfg", "dims = 9\nwindow = 25\n");
  auto b = temp_cfg("runconfig_hb.cfg", "window = 25\ndims = 9\n");
  RunConfig ca = RunConfig::from_file(a.string());
  RunConfig cb = RunConfig::from_file(b.string());
  CHECK(ca.canonical() == cb.canonical());
  CHECK(ca.hash() == cb.hash());

  cb.set("window", "26");
  CHECK(ca.hash() != cb.hash());

  // moving the output directory does not change the run identity
  ca.set("out", "/tmp/elsewhere");
  CHECK(ca.hash() == RunConfig::from_file(b.string()).hash());

  // every key shows up exactly once
  const std::string canon = ca.canonical();
  CHECK(canon.find("dims=9\n") != std::string::npos);
  CHECK(canon.find("window=25\n") != std::string::npos);
  CHECK(canon.find("\nout=") == std::string::npos);
  CHECK(canon.rfind("out=", 0) == std::string::npos);
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST_CASE("fnv1a64 matches the reference test vectors") {
  CHECK(fnv1a64("") == 14695981039346656037ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("train options inherit the run seed and objective") {
  RunConfig cfg;
  cfg.model = "sn-byol";
  cfg.seed = 42;
  cfg.window = 30;
  const TrainOptions opt = cfg.train_options();
  CHECK(opt.objective == Objective::Bootstrap);
  CHECK(opt.seed == 42);
  CHECK(opt.window == 60);  // defaults to twice the detection window
  CHECK(opt.min_overlap == cfg.min_overlap);

  cfg.train_window = 24;
  CHECK(cfg.train_options().window == 24);
  CHECK(cfg.train_options().min_overlap == 16);
}

TEST_CASE("output root falls back to the environment") {
  RunConfig cfg;
  cfg.out = "explicit";
  CHECK(cfg.out_root() == "explicit");
  cfg.out.clear();
  setenv("SNCPD_OUT", "/tmp/from_env", 1);
  CHECK(cfg.out_root() == "/tmp/from_env");
  unsetenv("SNCPD_OUT");
  CHECK(cfg.out_root() == "out");
}
