#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"
#include "xmeat/error.hpp"
#include "xmeat/hash.hpp"
#include "xmeat/table.hpp"

using namespace xmeat;

TEST(Table, CsvRoundTripWithQuoting) {
  Table t;
  t.header = {"a", "b,c", "d"};
  t.rows = {{"plain", "with,comma", "with \"quote\""}, {"", "line\nbreak", "x"}};
  const Table back = parse_csv(to_csv(t));
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
}

TEST(Table, RaggedRowRejected) {
  EXPECT_THROW(parse_csv("a,b\n1\n"), ValidationError);
}

TEST(Table, ColumnLookupNamesMissingColumn) {
  Table t;
  t.header = {"x"};
  try {
    t.column("missing_col");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("missing_col"), std::string::npos);
  }
}

TEST(Table, RealsRoundTripBitExact) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, xmeat::testing::uniform_int(rng, -20, 20));
    EXPECT_EQ(parse_real(format_real(v), "v"), v);
  }
  EXPECT_EQ(parse_real(format_real(0.1), "v"), 0.1);
}

TEST(Table, ParseRejectsGarbage) {
  EXPECT_THROW(parse_real("1.5x", "d"), ValidationError);
  EXPECT_THROW(parse_real("", "d"), ValidationError);
  EXPECT_THROW(parse_integer("12.5", "n"), ValidationError);
  EXPECT_EQ(parse_integer("4e8", "n"), 400000000);
}

TEST(Table, AtomicWriteLeavesNoTemporaries) {
  xmeat::testing::TempDir dir("table");
  const auto file = dir.path() / "out.csv";
  write_file_atomic(file, "one");
  write_file_atomic(file, "two");
  EXPECT_EQ(read_file(file), "two");
  size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++entries;
  EXPECT_EQ(entries, 1u);
}

TEST(Hash, KnownVectors) {
  EXPECT_EQ(sha256_hex(std::string_view("")),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex(std::string_view("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
