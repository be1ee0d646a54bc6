/*
 * Copyright 2026 The emoseq Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Drives the installed command-line binary as a subprocess.

#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Dir {
  Dir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("emoseq_cli_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~Dir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
  fs::path path;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result run(const Dir& dir, const std::string& args) {
  const std::string out = dir / "stdout.txt";
  const std::string err = dir / "stderr.txt";
  const std::string cmd = std::string("'") + EMOSEQ_CLI_PATH + "' " + args + " >'" + out + "' 2>'" + err + "'";
  const int status = std::system(cmd.c_str());
  Result r;
  if (status != -1 && WIFEXITED(status)) r.code = WEXITSTATUS(status);
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("cli: usage errors exit with code 1") {
  Dir dir;
  CHECK(run(dir, "--version").code == 0);
  CHECK(run(dir, "").code == 1);
  CHECK(run(dir, "frobnicate").code == 1);

  const Result bad_head = run(dir, "train --head banjo --manifest m.csv --split s.csv --cache-dir c");
  CHECK(bad_head.code == 1);
  CHECK(contains(bad_head.err, "banjo"));
  CHECK(contains(bad_head.err, "transformer"));

  CHECK(run(dir, "train --set no_such_key=1").code == 1);
  CHECK(run(dir, "train --set lr").code == 1);
  CHECK(run(dir, "train --batch-size 0").code == 1);
  CHECK(run(dir, "split --seed 7").code == 1);  // --manifest is required
  CHECK(run(dir, "evaluate --partition holdout").code == 1);
}

TEST_CASE("cli: missing inputs exit with code 2") {
  Dir dir;
  CHECK(run(dir, "report --report '" + (dir / "absent.csv") + "'").code == 2);
  const std::string cfg = dir / "run.cfg";
  CHECK(run(dir, "train --config '" + cfg + "'").code == 2);
}

TEST_CASE("cli: resolved configuration reports where each value came from") {
  Dir dir;
  const std::string cfg = dir / "run.cfg";
  std::ofstream(cfg) << "# comment\nlr=0.5\nbatch_size=4\nmanifest=" << (dir / "nope.csv") << "\n";
  const Result r = run(dir, "split --config '" + cfg + "' --set n_val=2 --n-test 3 --out '" + (dir / "s.csv") + "'");
  CHECK(r.code == 2);  // the manifest does not exist
  CHECK(contains(r.err, "lr=0.5  # file"));
  CHECK(contains(r.err, "n_val=2  # command line"));
  CHECK(contains(r.err, "n_test=3  # command line"));
  CHECK(contains(r.err, "seed=0  # default"));
}

TEST_CASE("cli: pipeline from synthesis to report") {
  Dir dir;
  const std::string data = dir / "data";
  const std::string cache = dir / "cache";
  const std::string manifest = data + "/manifest.csv";
  const std::string split = dir / "split.csv";
  const std::string ckpt = dir / "model.emsk";
  const std::string report = dir / "report.csv";
  const std::string small =
      " --set conv_layers=2 --set filters=4 --set embed_dim=8 --set post_fusion=8 --set fc1=8 --set fc2=8";

  REQUIRE(run(dir, "synth --out '" + data + "' --speakers 4 --clips-per-speaker 6 --seed 3").code == 0);
  REQUIRE(fs::exists(manifest));

  const Result audio = run(dir, "extract-audio --manifest '" + manifest + "' --cache-dir '" + cache + "'");
  REQUIRE(audio.code == 0);
  CHECK(contains(audio.out, "24 clips"));
  REQUIRE(run(dir, "extract-video --manifest '" + manifest + "' --cache-dir '" + cache + "'").code == 0);

  const Result sp = run(dir, "split --manifest '" + manifest + "' --n-val 1 --n-test 1 --out '" + split + "'");
  REQUIRE(sp.code == 0);
  CHECK(contains(sp.out, "train 2, val 1, test 1"));

  // Training needs a split that leaves room for every partition.
  CHECK(run(dir, "split --manifest '" + manifest + "' --n-val 2 --n-test 2 --out '" + (dir / "bad.csv") + "'")
            .code == 2);

  const std::string common = " --manifest '" + manifest + "' --split '" + split + "' --cache-dir '" + cache + "'";
  const Result tr = run(dir, "train --head maxpool --epochs 2 --batch-size 4" + common + small +
                                 " --checkpoint '" + ckpt + "'");
  REQUIRE_MESSAGE(tr.code == 0, tr.err);
  CHECK(contains(tr.err, "epoch 1:"));
  CHECK(contains(tr.err, "epoch 2:"));
  CHECK(fs::exists(ckpt));
  const std::string history = slurp(dir / "model.history.csv");
  CHECK(contains(history, "epoch"));

  const Result mismatch = run(dir, "evaluate --head gru --checkpoint '" + ckpt + "'" + common);
  CHECK(mismatch.code == 2);
  CHECK(contains(mismatch.err, "maxpool"));

  const Result ev = run(dir, "evaluate --head maxpool --checkpoint '" + ckpt + "'" + common + " --report '" +
                                 report + "'");
  REQUIRE_MESSAGE(ev.code == 0, ev.err);
  for (const char* name : {"angry", "happy", "sad", "neutral", "disgust", "fear"}) {
    CHECK(contains(ev.out, name));
  }
  CHECK(contains(ev.out, "harmonic"));
  REQUIRE(fs::exists(report));

  const Result shown = run(dir, "report --report '" + report + "'");
  CHECK(shown.code == 0);
  CHECK(contains(ev.out, shown.out));
}
