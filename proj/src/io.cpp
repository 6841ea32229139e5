#include "mcma/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "binary_io.hpp"
#include "mcma/errors.hpp"

namespace fs = std::filesystem;

namespace mcma {

namespace {

constexpr char kEcgB1Magic[5] = {'E', 'C', 'G', 'B', '1'};

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

EcgRecord read_ecgb1(const std::string& path) {
  const auto bytes = binio::read_file(path);
  binio::Reader r(bytes.data(), bytes.size());
  if (!r.can_read(sizeof kEcgB1Magic)) throw NotEcgB1("'" + path + "' is too short to be ECGB1");
  char magic[5];
  r.bytes(magic, 5);
  if (!std::equal(magic, magic + 5, kEcgB1Magic)) throw NotEcgB1("'" + path + "' lacks the ECGB1 magic");
  if (!r.can_read(kEcgB1HeaderSize - 5)) throw CorruptFile("'" + path + "' has a truncated header");
  const auto version = r.uint<std::uint16_t>();
  if (version != kEcgB1Version) {
    throw CorruptFile("'" + path + "' has unsupported ECGB1 version " + std::to_string(version));
  }
  const auto fs_hz = r.uint<std::uint32_t>();
  const auto n_leads = r.uint<std::uint8_t>();
  const auto n_samples = r.uint<std::uint32_t>();
  if (fs_hz == 0) throw CorruptFile("'" + path + "' declares fs = 0");
  if (n_leads < 1 || n_leads > kNumLeads) {
    throw CorruptFile("'" + path + "' declares " + std::to_string(n_leads) + " leads");
  }
  if (n_samples == 0) throw CorruptFile("'" + path + "' declares zero samples");
  if (!r.can_read(n_leads)) throw CorruptFile("'" + path + "' is truncated in the lead table");
  std::vector<LeadId> leads;
  for (std::size_t i = 0; i < n_leads; ++i) {
    const auto idx = r.uint<std::uint8_t>();
    if (idx >= kNumLeads) throw CorruptFile("'" + path + "' has lead byte " + std::to_string(idx));
    if (std::find(leads.begin(), leads.end(), LeadId(idx)) != leads.end()) {
      throw CorruptFile("'" + path + "' lists lead " + std::string(LeadId(idx).name()) + " twice");
    }
    leads.emplace_back(idx);
  }
  const std::uint64_t payload = std::uint64_t{n_leads} * n_samples * 4;
  if (r.remaining() != payload) {
    throw CorruptFile("'" + path + "' holds " + std::to_string(r.remaining()) +
                      " sample bytes, header declares " + std::to_string(payload));
  }
  Matrix data(n_leads, n_samples);
  for (double& v : data.flat()) {
    v = static_cast<double>(r.f32());
    if (!std::isfinite(v)) throw CorruptFile("'" + path + "' contains non-finite samples");
  }
  return make_record(std::move(data), static_cast<double>(fs_hz), std::move(leads), stem_of(path));
}

void write_ecgb1(const EcgRecord& rec, const std::string& path) {
  rec.validate();
  if (rec.fs != std::floor(rec.fs) || rec.fs > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidSignal("ECGB1 stores an integer sampling rate; got " + format_double(rec.fs));
  }
  if (rec.length() > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidSignal("record too long for ECGB1");
  }
  binio::Writer w;
  w.bytes(kEcgB1Magic, sizeof kEcgB1Magic);
  w.uint<std::uint16_t>(kEcgB1Version);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(rec.fs));
  w.uint<std::uint8_t>(static_cast<std::uint8_t>(rec.num_leads()));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(rec.length()));
  for (auto lead : rec.leads) w.uint<std::uint8_t>(static_cast<std::uint8_t>(lead.index()));
  for (double v : rec.data.flat()) {
    if (std::abs(v) > std::numeric_limits<float>::max()) {
      throw InvalidSignal("sample " + format_double(v) + " does not fit in float32");
    }
    w.f32(static_cast<float>(v));
  }
  binio::write_file(path, w.data());
}

EcgRecord read_csv(const std::string& path, double fs) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw MalformedCsv("'" + path + "' is empty");

  std::vector<LeadId> leads;
  std::string unknown;
  for (auto name : split_fields(line)) {
    if (auto lead = LeadId::try_from_name(name)) {
      if (std::find(leads.begin(), leads.end(), *lead) != leads.end()) {
        throw MalformedCsv("'" + path + "' has duplicate column " + std::string(name));
      }
      leads.push_back(*lead);
    } else {
      unknown += (unknown.empty() ? "" : ", ") + std::string(name);
    }
  }
  if (!unknown.empty()) throw UnknownLead(unknown);

  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != leads.size()) {
      throw MalformedCsv("'" + path + "' line " + std::to_string(line_no) + " has " +
                         std::to_string(fields.size()) + " fields, expected " +
                         std::to_string(leads.size()));
    }
    for (auto f : fields) {
      double v = 0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || f.empty() || !std::isfinite(v)) {
        throw MalformedCsv("'" + path + "' line " + std::to_string(line_no) + ": bad number '" +
                           std::string(f) + "'");
      }
      values.push_back(v);
    }
  }
  const std::size_t n = values.size() / leads.size();
  if (n == 0) throw MalformedCsv("'" + path + "' has no samples");
  Matrix data(leads.size(), n);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t c = 0; c < leads.size(); ++c) data(c, t) = values[t * leads.size() + c];
  }
  return make_record(std::move(data), fs, std::move(leads), stem_of(path));
}

void write_csv(const EcgRecord& rec, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (std::size_t c = 0; c < rec.num_leads(); ++c) out << (c ? "," : "") << rec.leads[c].name();
  out << '\n';
  std::string row;
  for (std::size_t t = 0; t < rec.length(); ++t) {
    row.clear();
    for (std::size_t c = 0; c < rec.num_leads(); ++c) {
      if (c) row += ',';
      row += format_double(rec.data(c, t));
    }
    row += '\n';
    out << row;
  }
  if (!out) throw IoError("short write to '" + path + "'");
}

std::vector<EcgRecord> load_corpus(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("'" + dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ecgb1") files.push_back(entry.path());
  }
  if (files.empty()) throw EmptyDataset("no .ecgb1 files in '" + dir + "'");
  std::sort(files.begin(), files.end());
  std::vector<EcgRecord> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(read_ecgb1(f.string()));
  return out;
}

EcgRecord read_record(const std::string& path, double csv_fs) {
  const auto ext = fs::path(path).extension().string();
  if (ext == ".csv") return read_csv(path, csv_fs);
  return read_ecgb1(path);
}

}  // namespace mcma
