#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "ahgn/dataset.hpp"
#include "ahgn/errors.hpp"
#include "test_util.hpp"

using namespace ahgn;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ahgn_dataset_tests";
  fs::create_directories(dir);
  return dir / name;
}

Dataset small_dataset() {
  std::mt19937_64 rng(8);
  Dataset ds;
  ds.dims = {3, 4, 5};
  for (int i = 0; i < 4; ++i) {
    ClipRecord c = test::toy_clip(rng, ds.dims, 2, 2, 2);
    c.clip_id = "c" + std::to_string(i);
    ds.clips.push_back(c);
  }
  return ds;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l << "\n";
}

}  // namespace

TEST(Dataset, RoundTrip) {
  const Dataset ds = small_dataset();
  const fs::path p = temp_file("roundtrip.jsonl");
  write_dataset(p, ds);
  const Dataset back = load_dataset(p);
  EXPECT_EQ(back.dims.d_h, 5u);
  ASSERT_EQ(back.clips.size(), ds.clips.size());
  EXPECT_EQ(back.clips[2].clip_id, "c2");
  EXPECT_EQ(back.clips[2].frames[0].feature, ds.clips[2].frames[0].feature);
  EXPECT_EQ(back.clips[2].label, ds.clips[2].label);
}

TEST(Validate, CleanFileHasNoFailures) {
  const fs::path p = temp_file("clean.jsonl");
  write_dataset(p, small_dataset());
  const auto r = validate_dataset(p);
  EXPECT_EQ(r.records, 4u);
  EXPECT_EQ(r.failures, 0u);
  EXPECT_TRUE(r.ok());
}

TEST(Validate, WidthMismatchNamesTheField) {
  Dataset ds = small_dataset();
  ds.clips[1].frames[0].feature.push_back(0.0);
  const fs::path p = temp_file("dv.jsonl");
  write_dataset(p, ds);
  const auto r = validate_dataset(p);
  EXPECT_EQ(r.failures, 1u);
  ASSERT_FALSE(r.issues.empty());
  EXPECT_EQ(r.issues[0].line, 3u);
  EXPECT_EQ(r.issues[0].clip_id, "c1");
  EXPECT_NE(r.issues[0].field.find("frames[0].f"), std::string::npos);
  EXPECT_NE(r.issues[0].message.find("d_v"), std::string::npos);
}

TEST(Validate, MalformedRecordsAreListedNotFatal) {
  const fs::path p = temp_file("bad.jsonl");
  std::vector<std::string> lines{R"({"d_v":1,"d_s":1,"d_h":1})",
                                 "{not json",
                                 R"({"clip_id":"a","frames":[{"t":1,"f":[0]},{"t":0.5,"f":[0]}],)"
                                 R"("subs":[{"t0":0,"t1":1,"tokens":[[0]]}],"statement":[[0]],"label":2})",
                                 R"({"clip_id":"b","frames":[{"t":0,"f":[0]}],)"
                                 R"("subs":[{"t0":1,"t1":1,"tokens":[[0]]}],"statement":[[0]],"label":1})"};
  write_lines(p, lines);
  const auto r = validate_dataset(p);
  EXPECT_EQ(r.records, 3u);
  EXPECT_EQ(r.failures, 3u);
  auto has = [&](const std::string& field) {
    for (const auto& i : r.issues) {
      if (i.field.find(field) != std::string::npos) return true;
    }
    return false;
  };
  EXPECT_TRUE(has("frames[1].t"));
  EXPECT_TRUE(has("label"));
  EXPECT_TRUE(has("subs[0]"));
  EXPECT_THROW(load_dataset(p), ValidationError);
}

TEST(Validate, EmptyFileIsAnEmptyInputError) {
  const fs::path p = temp_file("empty.jsonl");
  write_lines(p, {});
  EXPECT_THROW(validate_dataset(p), EmptyInputError);
}

TEST(Validate, MissingFileIsAnIoError) {
  EXPECT_THROW(validate_dataset(temp_file("does_not_exist.jsonl")), IoError);
}

TEST(Validate, BadHeaderIsAFormatError) {
  const fs::path p = temp_file("header.jsonl");
  write_lines(p, {R"({"d_v":3})"});
  EXPECT_THROW(validate_dataset(p), FormatError);
}

TEST(Dataset, FindClip) {
  const Dataset ds = small_dataset();
  EXPECT_EQ(find_clip(ds, "c3").clip_id, "c3");
  EXPECT_THROW(find_clip(ds, "nope"), LookupError);
}
