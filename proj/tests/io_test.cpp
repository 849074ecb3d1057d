#include <gtest/gtest.h>

#include <fstream>

#include "test_support.hpp"

using namespace oodselect;
using namespace oodselect::testing;

namespace {

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

ErrorKind load_error(const std::filesystem::path& p) {
  try {
    load_correctness(p);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Io;
}

}  // namespace

TEST(LoadCorrectness, EchoesInput) {
  TempDir dir("io");
  write(dir / "z.csv", "model_id,e1,e2\nm1,1,0\nm2,0,1\n");
  const auto z = load_correctness(dir / "z.csv");
  EXPECT_EQ(z.n_models(), 2u);
  EXPECT_TRUE(z(0, 0));
  EXPECT_FALSE(z(0, 1));
  EXPECT_FALSE(z(1, 0));
  EXPECT_TRUE(z(1, 1));
  EXPECT_EQ(z.model_ids(), (std::vector<std::string>{"m1", "m2"}));
}

TEST(LoadCorrectness, Errors) {
  TempDir dir("io");
  write(dir / "a.csv", "model_id,e1,e2\nm1,1,2\n");
  write(dir / "b.csv", "model_id,e1,e2\nm1,1,0\nm1,0,1\n");
  write(dir / "c.csv", "model_id,e1,e2\nm1,1\n");
  write(dir / "d.csv", "model_id,e1\n");
  EXPECT_EQ(load_error(dir / "a.csv"), ErrorKind::NonBinaryCell);
  EXPECT_EQ(load_error(dir / "b.csv"), ErrorKind::DuplicateModelId);
  EXPECT_EQ(load_error(dir / "c.csv"), ErrorKind::RaggedRow);
  EXPECT_EQ(load_error(dir / "d.csv"), ErrorKind::EmptyMatrix);
  EXPECT_EQ(load_error(dir / "missing.csv"), ErrorKind::Io);
  try {
    load_correctness(dir / "a.csv");
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("row=m1 col=e2"), std::string::npos);
  }
}

TEST(LoadCorrectness, RoundTrip) {
  TempDir dir("io");
  const auto z = random_matrix(5, 70, 8);
  write_correctness(dir / "z.csv", z);
  EXPECT_EQ(load_correctness(dir / "z.csv").bits(), z.bits());
}

TEST(LoadModels, ClipsSaturatedAccuracyWithWarning) {
  TempDir dir("io");
  write(dir / "m.csv", "model_id,id_accuracy,family\nm1,1.0,resnet\nm2,0.4,vit\nm3,0,vit\n");
  std::vector<std::string> warnings;
  const auto t = load_models(dir / "m.csv", 1e-3, &warnings);
  EXPECT_DOUBLE_EQ(t.records[0].id_accuracy, 0.999);
  EXPECT_DOUBLE_EQ(t.records[2].id_accuracy, 0.001);
  EXPECT_EQ(t.records[1].family, "vit");
  EXPECT_EQ(warnings.size(), 2u);
}

TEST(LoadModels, OptionalFamilyAndSplitColumns) {
  TempDir dir("io");
  write(dir / "a.csv", "model_id,id_accuracy\nm1,0.5\n");
  EXPECT_EQ(load_models(dir / "a.csv").records[0].family, "");
  write(dir / "b.csv", "model_id,id_accuracy,family,split\nm1,0.5,x,val\n");
  EXPECT_EQ(load_models(dir / "b.csv").records[0].split, Split::val);
  write(dir / "c.csv", "model_id,id_accuracy\nm1,0.5\nm1,0.6\n");
  EXPECT_THROW(load_models(dir / "c.csv"), Error);
  write(dir / "d.csv", "model_id,id_accuracy\nm1,1.5\n");
  EXPECT_THROW(load_models(dir / "d.csv"), Error);
}

TEST(ExampleMeta, RoundTripWithQuotedFields) {
  TempDir dir("io");
  std::vector<ExampleMeta> ex(2);
  ex[0].example_id = "e1";
  ex[0].label = "cat, small";
  ex[0].attributes["sex"] = "F";
  ex[1].example_id = "e2";
  ex[1].attributes["sex"] = "M";
  ex[1].attributes["site"] = "\"north\"";
  write_example_meta(dir / "x.csv", ex, {"sex", "site"});
  const auto back = load_example_meta(dir / "x.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].label, "cat, small");
  EXPECT_FALSE(back[1].label.has_value());
  EXPECT_EQ(back[0].attributes.count("site"), 0u);
  EXPECT_EQ(back[1].attributes.at("site"), "\"north\"");
}

TEST(Embeddings, RoundTripAndValidation) {
  TempDir dir("io");
  EmbeddingTable t{{"a", "b"}, 2, {{0.5, -1.25}, {3.0, 1e-7}}};
  write_embeddings(dir / "e.csv", t);
  const auto back = load_embeddings(dir / "e.csv");
  EXPECT_EQ(back.ids, t.ids);
  EXPECT_EQ(back.vectors, t.vectors);
  write(dir / "bad.csv", "id,v_0,v_1\na,1\n");
  EXPECT_THROW(load_embeddings(dir / "bad.csv"), Error);
  write(dir / "nan.csv", "id,v_0\na,nan\n");
  EXPECT_THROW(load_embeddings(dir / "nan.csv"), Error);
}

TEST(Csv, SplitLineHandlesQuotes) {
  EXPECT_EQ(csv::split_line("a,\"b,c\",\"d\"\"e\""), (std::vector<std::string>{"a", "b,c", "d\"e"}));
  EXPECT_EQ(csv::split_line("a,,b"), (std::vector<std::string>{"a", "", "b"}));
  EXPECT_EQ(csv::split_line(csv::escape("x\"y,z")), (std::vector<std::string>{"x\"y,z"}));
}
