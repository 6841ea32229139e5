#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "mcma/errors.hpp"
#include "mcma/io.hpp"
#include "mcma/synth.hpp"
#include "support.hpp"

using namespace mcma;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("mcma_io_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

EcgRecord random_record(std::size_t leads, std::size_t len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix m(leads, len);
  auto v = testing::random_values(leads * len, rng, -3, 3);
  // exactly representable in float32 so the round-trip can be compared bit-exactly
  for (auto& x : v) x = static_cast<double>(static_cast<float>(x));
  std::copy(v.begin(), v.end(), m.flat().begin());
  std::vector<LeadId> ids;
  for (std::size_t i = 0; i < leads; ++i) ids.emplace_back(i);
  return make_record(std::move(m), 500.0, ids, "r");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

}  // namespace

TEST_CASE("ECGB1 round-trip and layout") {
  TempDir dir("ecgb1");
  EcgRecord rec = random_record(12, 1024, 1);
  const auto path = dir.file("a.ecgb1");
  write_ecgb1(rec, path);
  CHECK(fs::file_size(path) == kEcgB1HeaderSize + 12 + 12 * 1024 * 4);

  EcgRecord back = read_ecgb1(path);
  CHECK(back.data == rec.data);
  CHECK(back.fs == 500.0);
  CHECK(back.leads == rec.leads);
  CHECK(back.record_id == "a");

  SUBCASE("header bytes") {
    std::ifstream in(path, std::ios::binary);
    std::vector<unsigned char> head(kEcgB1HeaderSize + 12);
    in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
    CHECK(std::string(head.begin(), head.begin() + 5) == "ECGB1");
    CHECK(head[5] == 1);  // version, little-endian
    CHECK(head[6] == 0);
    CHECK((head[7] | head[8] << 8) == 500);
    CHECK(head[11] == 12);
    CHECK((head[12] | head[13] << 8) == 1024);
    for (unsigned i = 0; i < 12; ++i) CHECK(head[16 + i] == i);
  }
}

TEST_CASE("ECGB1 rejects inconsistent files") {
  TempDir dir("bad");
  EcgRecord rec = random_record(12, 64, 2);
  const auto path = dir.file("x.ecgb1");
  write_ecgb1(rec, path);
  const auto size = fs::file_size(path);

  SUBCASE("12 leads declared, 11 rows present") {
    fs::resize_file(path, size - 64 * 4);
    CHECK_THROWS_AS(read_ecgb1(path), CorruptFile);
  }
  SUBCASE("trailing bytes") {
    std::ofstream(path, std::ios::app | std::ios::binary) << "xx";
    CHECK_THROWS_AS(read_ecgb1(path), CorruptFile);
  }
  SUBCASE("truncated header") {
    fs::resize_file(path, 9);
    CHECK_THROWS_AS(read_ecgb1(path), CorruptFile);
  }
  SUBCASE("bad magic") {
    write_text(path, "ECGB2 and then some");
    CHECK_THROWS_AS(read_ecgb1(path), NotEcgB1);
    write_text(path, "EC");
    CHECK_THROWS_AS(read_ecgb1(path), NotEcgB1);
  }
  SUBCASE("lead byte out of range") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(kEcgB1HeaderSize);
    f.put(12);
    f.close();
    CHECK_THROWS_AS(read_ecgb1(path), CorruptFile);
  }
  SUBCASE("non-integer fs cannot be written") {
    rec.fs = 360.5;
    CHECK_THROWS_AS(write_ecgb1(rec, path), InvalidSignal);
  }
  CHECK_THROWS_AS(read_ecgb1(dir.file("missing.ecgb1")), IoError);
}

TEST_CASE("ECGB1 single lead and reordering") {
  TempDir dir("single");
  Matrix m(1, 16, 0.5);
  write_ecgb1(make_record(m, 250.0, {LeadId::from_name("V1")}, "v"), dir.file("v.ecgb1"));
  EcgRecord v = read_ecgb1(dir.file("v.ecgb1"));
  REQUIRE(v.leads.size() == 1);
  CHECK(v.leads[0] == LeadId(6));
  CHECK(v.fs == 250.0);

  // lead table written out of order is normalised on read
  Matrix two(2, 4);
  two(0, 0) = 1;
  two(1, 0) = 2;
  EcgRecord rec = make_record(two, 500.0, {LeadId(9), LeadId(2)}, "p");
  write_ecgb1(rec, dir.file("p.ecgb1"));
  {
    std::fstream f(dir.file("p.ecgb1"), std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(kEcgB1HeaderSize);
    f.put(9);
    f.put(2);
  }
  EcgRecord back = read_ecgb1(dir.file("p.ecgb1"));
  CHECK(back.leads == std::vector<LeadId>{LeadId(2), LeadId(9)});
  // stored rows were [2-row, 1-row]; relabelled as [9, 2] they swap places
  CHECK(back.data(0, 0) == 1);
  CHECK(back.data(1, 0) == 2);
}

TEST_CASE("CSV reader") {
  TempDir dir("csv");
  const std::string names = "I,II,III,aVR,aVL,aVF,V1,V2,V3,V4,V5,V6";

  SUBCASE("12 named columns") {
    std::string text = names + "\n";
    for (int t = 0; t < 5; ++t) {
      for (int c = 0; c < 12; ++c) text += (c ? "," : "") + std::to_string(c + 0.25 * t);
      text += "\n";
    }
    write_text(dir.file("a.csv"), text);
    EcgRecord rec = read_csv(dir.file("a.csv"), 500.0);
    CHECK(rec.num_leads() == 12);
    CHECK(rec.length() == 5);
    CHECK(rec.data(11, 4) == 12.0);
  }
  SUBCASE("shuffled columns are normalised") {
    write_text(dir.file("s.csv"), "V6, I ,aVR\r\n1,2,3\r\n4,5,6\r\n");
    EcgRecord rec = read_csv(dir.file("s.csv"), 360.0);
    CHECK(rec.leads == std::vector<LeadId>{LeadId(0), LeadId(3), LeadId(11)});
    CHECK(extract_lead(rec, LeadId(0)) == std::vector<double>{2, 5});
    CHECK(extract_lead(rec, LeadId(11)) == std::vector<double>{1, 4});
  }
  SUBCASE("unknown column names are listed") {
    write_text(dir.file("u.csv"), "I,X9,V2,Q\n1,2,3,4\n");
    try {
      read_csv(dir.file("u.csv"), 500.0);
      FAIL("expected UnknownLead");
    } catch (const UnknownLead& e) {
      CHECK(std::string(e.what()).find("X9") != std::string::npos);
      CHECK(std::string(e.what()).find("Q") != std::string::npos);
    }
  }
  SUBCASE("ragged rows") {
    write_text(dir.file("r.csv"), "I,II\n1,2\n3\n");
    CHECK_THROWS_AS(read_csv(dir.file("r.csv"), 500.0), MalformedCsv);
  }
  SUBCASE("bad number") {
    write_text(dir.file("n.csv"), "I\n1\nabc\n");
    CHECK_THROWS_AS(read_csv(dir.file("n.csv"), 500.0), MalformedCsv);
  }
  SUBCASE("header only") {
    write_text(dir.file("h.csv"), "I,II\n");
    CHECK_THROWS_AS(read_csv(dir.file("h.csv"), 500.0), MalformedCsv);
  }
  SUBCASE("write then read is exact") {
    EcgRecord rec = random_record(12, 40, 5);
    rec.data(3, 7) = 0.1 + 0.2;  // not representable in short decimal form
    write_csv(rec, dir.file("w.csv"));
    CHECK(read_csv(dir.file("w.csv"), 500.0).data == rec.data);
  }
}

TEST_CASE("load_corpus reads sorted ECGB1 files") {
  TempDir dir("corpus");
  CHECK_THROWS_AS(load_corpus(dir.path.string()), EmptyDataset);
  write_ecgb1(random_record(12, 8, 1), dir.file("b.ecgb1"));
  write_ecgb1(random_record(12, 8, 2), dir.file("a.ecgb1"));
  write_text(dir.file("notes.txt"), "ignored");
  auto recs = load_corpus(dir.path.string());
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].record_id == "a");
  CHECK(recs[1].record_id == "b");
  CHECK_THROWS_AS(load_corpus(dir.file("nope")), IoError);
}
