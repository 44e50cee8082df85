#include "doctest.h"

#include <cstdlib>

#include "adrpipe/delimited.hpp"

#include "support.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const fs::path& stdout_file) {
  const std::string cmd =
      "\"" + adrtest::cli_path().string() + "\" " + args + " > \"" + stdout_file.string() +
      "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("cli stats matches the loaders") {
  const fs::path dir = adrtest::temp_dir("cli");
  const int rc =
      run_cli("stats \"" + (adrtest::fixtures_dir() / "cadec_synth").string() + "\" --format cadec",
              dir / "stats.txt");
  CHECK(rc == 0);
  const std::string out = adrpipe::read_text_file(dir / "stats.txt");
  const auto expected = adrtest::fixture_counts()["cadec"];
  CHECK(out.find("entities: " + std::to_string(expected["entity_count"].get<int>())) !=
        std::string::npos);
  CHECK(out.find("adr: " + std::to_string(expected["adr_count"].get<int>())) != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("cli run on the bundled corpus exits 0 with macro F 1.0") {
  const fs::path dir = adrtest::temp_dir("cli-run");
  adrpipe::write_text_file(dir / "exp.cfg",
                           "source_corpus = " +
                               (adrtest::fixtures_dir() / "cadec_synth").string() +
                               "\nsource_format = cadec\nk = 5\nseed = 42\noutput_dir = " +
                               (dir / "out").string() + "\n");
  const int rc = run_cli("run \"" + (dir / "exp.cfg").string() + "\"", dir / "run.txt");
  CHECK(rc == 0);
  CHECK(adrpipe::read_text_file(dir / "run.txt").find("macro_f1: 1.000") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "report.json"));
  fs::remove_all(dir);
}

TEST_CASE("cli run --dry-run prints stats and writes nothing") {
  const fs::path dir = adrtest::temp_dir("cli-dry");
  adrpipe::write_text_file(dir / "exp.cfg",
                           "source_corpus = " +
                               (adrtest::fixtures_dir() / "cadec_synth").string() +
                               "\nsource_format = cadec\noutput_dir = " + (dir / "out").string() +
                               "\n");
  const int rc = run_cli("run --dry-run \"" + (dir / "exp.cfg").string() + "\"", dir / "dry.txt");
  CHECK(rc == 0);
  CHECK(adrpipe::read_text_file(dir / "dry.txt").find("reviews: 40") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "out" / "report.json"));
  fs::remove_all(dir);
}

TEST_CASE("cli validate exit codes") {
  const fs::path dir = adrtest::temp_dir("cli-val");
  adrpipe::write_text_file(dir / "bad.cfg", "source_corpus = /missing\nk = 1\noutput_dir = o\n");
  CHECK(run_cli("validate \"" + (dir / "bad.cfg").string() + "\"", dir / "v.txt") == 1);
  const std::string out = adrpipe::read_text_file(dir / "v.txt");
  CHECK(out.find("violation:") != std::string::npos);
  CHECK(out.find("k must be >= 2") != std::string::npos);

  adrpipe::write_text_file(dir / "ok.cfg",
                           "source_corpus = " +
                               (adrtest::fixtures_dir() / "cadec_synth").string() +
                               "\nsource_format = cadec\noutput_dir = " + (dir / "o").string() +
                               "\n");
  CHECK(run_cli("validate \"" + (dir / "ok.cfg").string() + "\"", dir / "v2.txt") == 0);
  fs::remove_all(dir);
}

TEST_CASE("cli run with a missing file exits nonzero and writes no reports") {
  const fs::path dir = adrtest::temp_dir("cli-missing");
  adrpipe::write_text_file(dir / "exp.cfg",
                           "source_corpus = /no/such/path\nsource_format = cadec\noutput_dir = " +
                               (dir / "out").string() + "\n");
  const int rc = run_cli("run \"" + (dir / "exp.cfg").string() + "\"", dir / "r.txt");
  CHECK(rc == 1);  // missing path is a validation failure
  CHECK_FALSE(fs::exists(dir / "out" / "report.json"));
  fs::remove_all(dir);
}

TEST_CASE("cli pseudo subcommand persists the set") {
  const fs::path dir = adrtest::temp_dir("cli-pseudo");
  adrpipe::write_text_file(
      dir / "exp.cfg",
      "source_corpus = " + (adrtest::fixtures_dir() / "cadec_synth").string() +
          "\nsource_format = cadec\nraw_reviews = " +
          (adrtest::fixtures_dir() / "reviews_raw.csv").string() +
          "\nstrategy = min_rating\noutput_dir = " + (dir / "out").string() + "\n");
  const int rc = run_cli("pseudo \"" + (dir / "exp.cfg").string() + "\"", dir / "p.txt");
  CHECK(rc == 0);
  CHECK(fs::exists(dir / "out" / "pseudo.jsonl"));
  CHECK(fs::exists(dir / "out" / "pseudo_manifest.json"));
  const std::string out = adrpipe::read_text_file(dir / "p.txt");
  const auto expected = adrtest::fixture_counts()["reviews"];
  CHECK(out.find("selected_reviews: " +
                 std::to_string(expected["min_rating_count"].get<int>())) != std::string::npos);
  fs::remove_all(dir);
}
