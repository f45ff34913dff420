#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "json.hpp"
#include "labelprop/errors.hpp"
#include "labelprop/io.hpp"
#include "support.hpp"

using namespace labelprop;
namespace fs = std::filesystem;

namespace {

const fs::path kData = LABELPROP_TEST_DATA;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("labelprop_io_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<std::uint8_t> bytes_of(const fs::path& p) {
  const std::string s = io::read_text(p);
  return {s.begin(), s.end()};
}

}  // namespace

TEST_CASE("golden npy fixture") {
  const std::vector<float> expect{0.5f, -1.25f, 3.0f, 0.125f, -2.5f, 7.75f, 1e-3f, -0.0f};
  const auto g = io::read_tensor(kData / "golden_2x2x2_f4.npy");
  CHECK(g.channels() == 2);
  CHECK(g.height() == 2);
  CHECK(g.width() == 2);
  CHECK(std::vector<float>(g.values().begin(), g.values().end()) == expect);
  CHECK(g.at(1, 0, 1) == 7.75f);

  const auto d = io::read_tensor(kData / "golden_2x2x2_f8.npy");
  CHECK(d == g);
  CHECK(io::read_tensor(kData / "golden_v2.npy") == g);

  // the writer reproduces numpy's bytes exactly
  const std::vector<std::size_t> shape{2, 2, 2};
  CHECK(io::encode_npy(shape, expect) == bytes_of(kData / "golden_2x2x2_f4.npy"));

  CHECK_THROWS_AS(io::read_tensor(kData / "golden_i4.npy"), FormatError);
  CHECK_THROWS_AS(io::read_tensor(kData / "golden_fortran.npy"), FormatError);
}

TEST_CASE("npy errors and round trip") {
  const auto good = bytes_of(kData / "golden_2x2x2_f4.npy");
  auto bad_magic = good;
  bad_magic[1] = 'X';
  CHECK_THROWS_AS(io::parse_npy(bad_magic), FormatError);
  CHECK_THROWS_AS(io::parse_npy(std::span(good).first(20)), FormatError);
  CHECK_THROWS_AS(io::parse_npy(std::span(good).first(good.size() - 4)), FormatError);

  TempDir tmp;
  std::mt19937_64 rng(1);
  for (auto [c, h, w] : {std::tuple{1, 1, 1}, std::tuple{3, 4, 5}, std::tuple{64, 9, 13}}) {
    const auto g = testing::random_features(rng, c, h, w);
    io::write_tensor(g, tmp.path / "t.npy");
    CHECK(io::read_tensor(tmp.path / "t.npy") == g);
    const auto bytes = bytes_of(tmp.path / "t.npy");
    CHECK((bytes[8] | (bytes[9] << 8)) % 64 == 64 - 10);  // header ends on a 64-byte boundary
  }
  const auto s = testing::random_soft(rng, 3, 2, 5);
  io::write_scores(s, tmp.path / "s.npy");
  CHECK(io::read_scores(tmp.path / "s.npy") == s);

  const std::vector<std::size_t> flat{8};
  io::write_npy(tmp.path / "flat.npy", flat, std::vector<float>(8, 1.0f));
  CHECK_THROWS_AS(io::read_tensor(tmp.path / "flat.npy"), FormatError);
  CHECK_THROWS_AS(io::read_tensor(tmp.path / "missing.npy"), DataError);
}

TEST_CASE("png masks") {
  TempDir tmp;
  ClassMap one(1, 1, 7);
  io::write_mask(one, tmp.path / "one.png");
  CHECK(io::read_mask(tmp.path / "one.png") == one);

  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::int32_t> cls(0, 255);
  ClassMap m(13, 29);
  for (auto& v : m.ids) v = cls(rng);
  io::write_mask(m, tmp.path / "m.png");
  CHECK(io::read_mask(tmp.path / "m.png") == m);

  const auto pal = io::davis_palette();
  CHECK(pal[0] == std::array<std::uint8_t, 3>{0, 0, 0});
  CHECK(pal[1] == std::array<std::uint8_t, 3>{128, 0, 0});
  CHECK(pal[2] == std::array<std::uint8_t, 3>{0, 128, 0});

  ClassMap big(1, 1, 300);
  CHECK_THROWS_AS(io::write_mask(big, tmp.path / "big.png"), DataError);
  io::write_text(tmp.path / "junk.png", "not a png");
  CHECK_THROWS_AS(io::read_mask(tmp.path / "junk.png"), FormatError);
  const auto png = io::read_text(tmp.path / "m.png");
  io::write_text(tmp.path / "cut.png", png.substr(0, png.size() / 2));
  CHECK_THROWS_AS(io::read_mask(tmp.path / "cut.png"), FormatError);
  CHECK_THROWS_AS(io::write_mask(m, tmp.path / "no" / "such" / "dir.png"), DataError);
}

TEST_CASE("keypoints file") {
  TempDir tmp;
  KeypointSet kp;
  kp.points = {{0, 1.5, 2.25, true}, {3, 0.0, 10.0, false}};
  io::write_keypoints(kp, tmp.path / "k.json");
  CHECK(io::read_keypoints(tmp.path / "k.json") == kp);

  io::write_text(tmp.path / "dup.json",
                 R"({"format_version":1,"keypoints":[{"class":1,"x":0,"y":0,"visible":true},)"
                 R"({"class":1,"x":1,"y":1,"visible":true}]})");
  CHECK_THROWS_AS(io::read_keypoints(tmp.path / "dup.json"), FormatError);
  io::write_text(tmp.path / "bad.json", R"({"format_version":1,"keypoints":[{"class":1,"x":0}]})");
  CHECK_THROWS_AS(io::read_keypoints(tmp.path / "bad.json"), FormatError);
  io::write_text(tmp.path / "ver.json", R"({"format_version":2,"keypoints":[]})");
  CHECK_THROWS_AS(io::read_keypoints(tmp.path / "ver.json"), FormatError);
}

TEST_CASE("manifest") {
  TempDir tmp;
  const FeatureGrid g(2, 2, 2);
  io::write_tensor(g, tmp.path / "f0.npy");
  io::write_tensor(g, tmp.path / "f1.npy");
  io::write_mask(ClassMap(16, 16, 1), tmp.path / "a0.png");

  io::Manifest m;
  io::SequenceManifest seq;
  seq.id = "s";
  seq.frames.push_back({0, tmp.path / "f0.npy", tmp.path / "a0.png", 16, 16});
  seq.frames.push_back({5, tmp.path / "f1.npy", std::nullopt, 16, 16});
  m.sequences.push_back(seq);
  io::write_manifest(m, tmp.path / "manifest.json");
  const auto text = io::read_text(tmp.path / "manifest.json");
  CHECK(text.find("\"f0.npy\"") != std::string::npos);

  const auto back = io::read_manifest(tmp.path / "manifest.json");
  REQUIRE(back.sequences.size() == 1);
  CHECK(back.sequences[0].frames[1].index == 5);
  CHECK(back.sequences[0].frames[0].features == tmp.path / "f0.npy");
  CHECK_FALSE(back.sequences[0].frames[1].annotation);

  auto edit = [&](auto&& fn) {
    auto doc = nlohmann::json::parse(text);
    fn(doc);
    io::write_text(tmp.path / "edit.json", doc.dump());
    return tmp.path / "edit.json";
  };
  CHECK_THROWS_AS(io::read_manifest(edit([](auto& d) { d["sequences"][0]["frames"][1]["index"] = 0; })),
                  FormatError);
  CHECK_THROWS_AS(io::read_manifest(edit([](auto& d) { d["sequences"][0]["frames"][0].erase("annotation"); })),
                  FormatError);
  CHECK_THROWS_AS(io::read_manifest(edit([](auto& d) { d["sequences"][0]["frames"][1]["features"] = "nope.npy"; })),
                  DataError);
  CHECK_THROWS_AS(io::read_manifest(edit([](auto& d) { d["format_version"] = 9; })), FormatError);
  CHECK_THROWS_AS(io::read_manifest(edit([](auto& d) { d["sequences"][0]["task"] = "semantic"; })), FormatError);
  CHECK_THROWS_AS(io::read_manifest(edit([](auto& d) { d["sequences"].push_back(d["sequences"][0]); })),
                  FormatError);
  CHECK_THROWS_AS(io::parse_task("depth"), FormatError);
}

TEST_CASE("report layout") {
  MetricsReport r = davis_aggregate(std::vector<SequenceScore>{{"bike", 1, 0.75, 0.5}, {"car", 2, 0.25, 1.0}});
  CHECK(io::format_report(r) == io::read_text(kData / "golden_report.csv"));
  r.pck.push_back({0.1, 0.5});
  r.miou = 0.25;
  CHECK(io::format_summary(r) ==
        "metric,value\nJ_M,0.500000\nJ_O,0.500000\nF_M,0.750000\nF_O,0.500000\nJF_M,0.625000\n"
        "PCK@0.1,0.500000\nmIoU,0.250000\n");
}
