#include <doctest.h>

#include <cstring>
#include <fstream>

#include "gloredi/io.hpp"
#include "gloredi/nn/checkpoint.hpp"
#include "gloredi/nn/model.hpp"
#include "test_util.hpp"

using namespace gloredi;
using namespace gloredi::nn;

namespace {

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

EncoderDecoderConfig small() {
  EncoderDecoderConfig cfg;
  cfg.ffc_blocks_encoder = 1;
  cfg.ffc_blocks_decoder = 1;
  return cfg;
}

}  // namespace

TEST_CASE("checkpoint entries") {
  Checkpoint ckpt;
  ckpt.add_scalar("meta.iteration", 12);
  ckpt.add("w", Grid({2, 3}, 0.5));
  CHECK(ckpt.contains("w"));
  CHECK_FALSE(ckpt.contains("v"));
  CHECK(ckpt.scalar("meta.iteration") == 12.0);
  CHECK_THROWS_AS(ckpt.scalar("w"), FormatError);
  CHECK_THROWS_AS(ckpt.get("v"), FormatError);
  CHECK_THROWS_AS(ckpt.add("w", Grid({1})), std::invalid_argument);
  CHECK_THROWS_AS(ckpt.add("", Grid({1})), std::invalid_argument);
}

TEST_CASE("file layout is magic, count, then named float32 tensors") {
  Checkpoint ckpt;
  ckpt.add("ab", Grid({2}, std::vector<double>{1.5, -2.0}));
  const auto dir = testutil::scratch_dir("ckpt_layout");
  save_checkpoint(dir / "c.gdc", ckpt);
  const std::string bytes = read_bytes(dir / "c.gdc");
  // 4 magic + 4 count + 4 name length + 2 name + 4 rank + 4 extent + 2 * 4 payload
  CHECK(bytes.size() == 30);
  CHECK(bytes.substr(0, 4) == "GDC1");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 2);
  CHECK(bytes.substr(12, 2) == "ab");
  float first = 0.0f;
  std::memcpy(&first, bytes.data() + 22, 4);
  CHECK(first == 1.5f);
}

TEST_CASE("module round trip") {
  std::mt19937_64 rng(1);
  Encoder a("encoder", small(), rng), b("encoder", small(), rng);
  a.forward(testutil::random_grid({2, 1, 16, 16}, rng));
  Checkpoint ckpt;
  ckpt.add_scalar("config.base_channels", 64);
  ckpt.add_module(a, "student.");
  CHECK(ckpt.contains("student.encoder.down1.conv.weight"));
  const auto dir = testutil::scratch_dir("ckpt_round");
  save_checkpoint(dir / "m.gdc", ckpt);
  const Checkpoint loaded = load_checkpoint(dir / "m.gdc");
  CHECK(loaded.entries().size() == ckpt.entries().size());
  loaded.load_module(b, "student.");
  const auto sa = state(a), sb = state(b);
  for (std::size_t i = 0; i < sa.size(); ++i) {
    CHECK((*sa[i].grid - *sb[i].grid).max_abs() <= 1e-6 * std::max(1.0, sa[i].grid->max_abs()));
  }
  save_checkpoint(dir / "again.gdc", loaded);
  CHECK(read_bytes(dir / "again.gdc") == read_bytes(dir / "m.gdc"));
}

TEST_CASE("load_module rejects mismatches") {
  std::mt19937_64 rng(2);
  Decoder dec("decoder", small(), rng);
  Checkpoint full;
  full.add_module(dec);

  Checkpoint missing;
  for (const auto& e : full.entries()) {
    if (e.name != "decoder.out.bias") missing.add(e.name, e.value);
  }
  CHECK_THROWS_AS(missing.load_module(dec), FormatError);

  Checkpoint reshaped;
  for (const auto& e : full.entries()) {
    reshaped.add(e.name, e.name == "decoder.out.bias" ? Grid({2}) : e.value);
  }
  CHECK_THROWS_AS(reshaped.load_module(dec), FormatError);

  Checkpoint extra = full;
  extra.add("decoder.unknown.weight", Grid({1}));
  CHECK_THROWS_AS(extra.load_module(dec), FormatError);
  CHECK_NOTHROW(full.load_module(dec));
}

TEST_CASE("corrupt files are rejected") {
  const auto dir = testutil::scratch_dir("ckpt_bad");
  Checkpoint ckpt;
  ckpt.add("x", Grid({3}, 1.0));
  save_checkpoint(dir / "ok.gdc", ckpt);
  const std::string good = read_bytes(dir / "ok.gdc");

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  write_bytes(dir / "magic.gdc", bad_magic);
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.gdc"), FormatError);

  write_bytes(dir / "short.gdc", good.substr(0, good.size() - 2));
  CHECK_THROWS_AS(load_checkpoint(dir / "short.gdc"), FormatError);

  write_bytes(dir / "long.gdc", good + "zz");
  CHECK_THROWS_AS(load_checkpoint(dir / "long.gdc"), FormatError);

  std::string huge_name = good;
  huge_name[8] = static_cast<char>(0xff);
  huge_name[9] = static_cast<char>(0xff);
  write_bytes(dir / "name.gdc", huge_name);
  CHECK_THROWS_AS(load_checkpoint(dir / "name.gdc"), FormatError);

  CHECK_THROWS_AS(load_checkpoint(dir / "absent.gdc"), FormatError);
}
