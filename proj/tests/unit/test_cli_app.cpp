#include <catch_amalgamated.hpp>

#include <filesystem>

#include "sfr/experiment.hpp"

using namespace sfr;
using namespace sfr::app;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("sfr_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

json read_json(const fs::path& p) { return json::parse(sfr::detail::read_file(p)); }

std::string le32(std::uint32_t v) {
  std::string s;
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  return s;
}

std::string le16(std::uint16_t v) { return {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)}; }

std::string float_wav(const std::vector<float>& x, std::uint32_t rate, std::uint16_t channels = 1) {
  std::string data(reinterpret_cast<const char*>(x.data()), 4 * x.size());
  std::string fmt = le16(3) + le16(channels) + le32(rate) + le32(rate * 4 * channels) + le16(4 * channels) + le16(32);
  std::string body = "WAVE" + std::string("fmt ") + le32(16) + fmt + "LIST" + le32(3) + "abc" + '\0' + "data" +
                     le32(static_cast<std::uint32_t>(data.size())) + data;
  return "RIFF" + le32(static_cast<std::uint32_t>(body.size())) + body;
}

}  // namespace

TEST_CASE("git blob hash matches git hash-object", "[cli][hash]") {
  CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
  CHECK(git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST_CASE("configuration layering and validation", "[cli][config]") {
  Overrides ov;
  ov.mode = "fit-kernel";
  ov.sets = {"kernel.lambda=0.5", "dataset=some/path.sfrd", "evaluate.method=tesm"};
  ov.seed = 7;
  const auto cfg = resolve_config(std::nullopt, ov);
  CHECK(cfg["kernel"]["lambda"] == 0.5);
  CHECK(cfg["dataset"] == "some/path.sfrd");
  CHECK(cfg["evaluate"]["method"] == "tesm");
  CHECK(cfg["seed"] == 7);
  CHECK(cfg["train"]["iterations"] == 3000);

  Overrides bad;
  bad.sets = {"train.iterationz=5"};
  CHECK_THROWS_AS(resolve_config(std::nullopt, bad), ConfigError);
  bad.sets = {"train=5"};
  CHECK_THROWS_AS(resolve_config(std::nullopt, bad), ConfigError);
  bad.sets = {"noequals"};
  CHECK_THROWS_AS(resolve_config(std::nullopt, bad), ConfigError);
  bad.sets = {"train.lr=fast"};
  CHECK_THROWS_AS(resolve_config(std::nullopt, bad), ConfigError);

  TempDir tmp("config");
  sfr::detail::write_file(tmp.path / "c.json", R"({"mode": "evaluate", "extra": 1})");
  CHECK_THROWS_AS(resolve_config(tmp.path / "c.json", {}), ConfigError);
  sfr::detail::write_file(tmp.path / "c.json", R"({"mode": "evaluate"})");
  Overrides clash;
  clash.mode = "simulate";
  CHECK_THROWS_AS(resolve_config(tmp.path / "c.json", clash), ConfigError);
  sfr::detail::write_file(tmp.path / "c.json", "{not json");
  CHECK_THROWS_AS(resolve_config(tmp.path / "c.json", {}), ConfigError);
}

TEST_CASE("validation failures leave no outputs behind", "[cli][config]") {
  TempDir tmp("nopartial");
  const auto out = tmp.path / "out";
  auto attempt = [&](std::vector<std::string> sets, std::string mode) {
    Overrides ov;
    ov.mode = std::move(mode);
    ov.out = out.string();
    ov.sets = std::move(sets);
    CHECK_THROWS_AS(run(std::nullopt, ov), Error);
    CHECK_FALSE(fs::exists(out));
  };
  attempt({}, "train-pinn");
  attempt({"dataset=/nonexistent/field.sfrd"}, "fit-kernel");
  attempt({"simulate.preset=\"cathedral\""}, "simulate");
  attempt({"simulate.band_hz=[2000, 200]"}, "simulate");
  attempt({"train.lr=-1", "dataset=/nonexistent"}, "train-pinn");
  attempt({}, "bogus-mode");
  Overrides none;
  none.out = out.string();
  CHECK_THROWS_AS(run(std::nullopt, none), ConfigError);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("simulate writes the preset field, sidecar and manifest", "[cli][simulate]") {
  TempDir tmp("simulate");
  Overrides ov;
  ov.mode = "simulate";
  ov.preset = "meshrir-like";
  ov.out = (tmp.path / "sim").string();
  const auto res = run(std::nullopt, ov);
  const auto field = read_field(tmp.path / "sim" / "field.sfrd");
  CHECK(field.samples() == 800);
  CHECK(field.sensors() == 64);
  const auto m = read_json(res.manifest);
  CHECK(m["status"] == "complete");
  CHECK(m["mode"] == "simulate");
  CHECK(m["config"]["simulate"]["preset"] == "meshrir-like");
  REQUIRE(m["outputs"].size() == 2);
  CHECK(m["outputs"][0]["sha1"] == file_hash(tmp.path / "sim" / "field.sfrd"));
  CHECK(read_json(tmp.path / "sim" / "config.json") == m["config"]);
}

TEST_CASE("evaluate on an exact estimate reports clamped NMSE", "[cli][evaluate]") {
  TempDir tmp("evaluate");
  Overrides sim;
  sim.mode = "simulate";
  sim.out = (tmp.path / "sim").string();
  sim.sets = {"simulate.samples=200"};
  run(std::nullopt, sim);
  const auto field = (tmp.path / "sim" / "field.sfrd").string();
  const auto before = file_hash(field);

  Overrides ev;
  ev.mode = "evaluate";
  ev.out = (tmp.path / "eval").string();
  ev.sets = {"dataset=" + field, "evaluate.estimate=" + field, "subset.fraction=0.5"};
  run(std::nullopt, ev);
  const auto report = read_json(tmp.path / "eval" / "report.json");
  CHECK(report["nmse_total_db"] == -200.0);
  CHECK(report["nmse_val_db"] == -200.0);
  CHECK(report["nmse_sig_db"] == -200.0);
  CHECK(report["subset"].size() == 32);
  CHECK(file_hash(field) == before);
}

TEST_CASE("an interrupted run leaves a running manifest", "[cli][manifest]") {
  TempDir tmp("interrupted");
  Overrides sim;
  sim.mode = "simulate";
  sim.out = (tmp.path / "sim").string();
  sim.sets = {"simulate.samples=100"};
  run(std::nullopt, sim);
  Overrides ev;
  ev.mode = "evaluate";
  ev.out = (tmp.path / "eval").string();
  const auto field = (tmp.path / "sim" / "field.sfrd").string();
  ev.sets = {"dataset=" + field, "evaluate.estimate=" + field};
  auto p = prepare(resolve_config(std::nullopt, ev));
  p.estimate->data.resize(3, 3);
  CHECK_THROWS(execute(p));
  const auto m = read_json(tmp.path / "eval" / "manifest.json");
  CHECK(m["status"] == "running");
  CHECK(m["inputs"].size() == 4);
}

TEST_CASE("identical single-threaded runs are byte identical", "[cli][reproducibility]") {
  TempDir tmp("repro");
  Overrides sim;
  sim.mode = "simulate";
  sim.out = (tmp.path / "sim").string();
  sim.sets = {"simulate.samples=120"};
  run(std::nullopt, sim);
  Overrides tr;
  tr.mode = "train-pinn";
  tr.out = (tmp.path / "train").string();
  tr.threads = 1;
  tr.sets = {"dataset=" + (tmp.path / "sim" / "field.sfrd").string(), "train.hidden_width=8",
             "train.iterations=6", "train.collocation_count=16", "train.data_batch=64", "train.log_every=0"};
  std::ostringstream log;
  const auto a = run(std::nullopt, tr, log);
  std::map<std::string, std::string> first;
  for (const auto& o : a.outputs) first[o.string()] = sfr::detail::read_file(tmp.path / "train" / o);
  first["manifest.json"] = sfr::detail::read_file(a.manifest);
  fs::remove_all(tmp.path / "train");
  const auto b = run(std::nullopt, tr, log);
  for (const auto& o : b.outputs) CHECK(sfr::detail::read_file(tmp.path / "train" / o) == first.at(o.string()));
  CHECK(sfr::detail::read_file(b.manifest) == first.at("manifest.json"));
}

TEST_CASE("WAV decoding", "[cli][wav]") {
  TempDir tmp("wav");
  const std::vector<double> x = {0.0, 0.5, -0.5, 0.25, -1.0};
  const auto pcm = decode_wav(encode_wav_pcm16(x, 16000));
  CHECK(pcm.info.format == 1);
  REQUIRE(pcm.samples.size() == 5);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(pcm.samples[i] == x[i]);

  const auto flt = decode_wav(float_wav({0.125f, -0.75f}, 16000));
  CHECK(flt.info.format == 3);
  CHECK(flt.samples == std::vector<double>{0.125, -0.75});

  CHECK_THROWS_AS(decode_wav(float_wav({0.1f, 0.2f}, 16000, 2)), ParseError);
  CHECK_THROWS_AS(decode_wav("RIFF0000WAVX"), ParseError);
  sfr::detail::write_file(tmp.path / "cd.wav", float_wav({0.1f}, 44100));
  CHECK_THROWS_AS(read_wav(tmp.path / "cd.wav"), ParseError);
  auto truncated = encode_wav_pcm16(x, 16000);
  truncated.resize(truncated.size() - 3);
  CHECK_THROWS_AS(decode_wav(truncated), ParseError);
}

TEST_CASE("simulate accepts a WAV source signal", "[cli][wav][simulate]") {
  TempDir tmp("wavsim");
  std::vector<double> src(300, 0.0);
  src[0] = 0.5;
  sfr::detail::write_file(tmp.path / "click.wav", encode_wav_pcm16(src, 16000));
  Overrides ov;
  ov.mode = "simulate";
  ov.out = (tmp.path / "sim").string();
  ov.sets = {"simulate.source_wav=" + (tmp.path / "click.wav").string(), "simulate.samples=400"};
  const auto res = run(std::nullopt, ov);
  const auto f = read_field(tmp.path / "sim" / "field.sfrd");
  CHECK(f.samples() == 400);
  // Free field: sensor 0 hears the click after its distance over c.
  Eigen::Index peak = 0;
  f.data.col(0).cwiseAbs().maxCoeff(&peak);
  const double d = (f.grid.positions[0] - DeskPreset::free_field().source).norm();
  CHECK(std::abs(peak - d / kSpeedOfSound * 16000.0) <= 1.0);
  CHECK(read_json(res.manifest)["inputs"].size() == 1);
}
