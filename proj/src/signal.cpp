#include "mcma/signal.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "mcma/errors.hpp"

namespace mcma {

namespace {

constexpr std::array<std::string_view, kNumLeads> kLeadNames = {
    "I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6"};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

void require_finite(std::span<const double> xs, const char* what) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i])) {
      throw InvalidSignal(std::string(what) + ": non-finite sample at index " + std::to_string(i));
    }
  }
}

}  // namespace

LeadId::LeadId(std::size_t index) : index_(index) {
  if (index >= kNumLeads) {
    throw UnknownLead("lead index " + std::to_string(index) + " outside [0, 11]");
  }
}

std::optional<LeadId> LeadId::try_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumLeads; ++i) {
    if (iequals(name, kLeadNames[i])) return LeadId(i);
  }
  return std::nullopt;
}

LeadId LeadId::from_name(std::string_view name) {
  if (auto lead = try_from_name(name)) return *lead;
  throw UnknownLead(std::string(name));
}

std::array<LeadId, kNumLeads> LeadId::all() {
  std::array<LeadId, kNumLeads> out;
  for (std::size_t i = 0; i < kNumLeads; ++i) out[i] = LeadId(i);
  return out;
}

std::string_view LeadId::name() const { return kLeadNames[index_]; }

std::optional<std::size_t> EcgRecord::row_of(LeadId lead) const {
  auto it = std::find(leads.begin(), leads.end(), lead);
  if (it == leads.end()) return std::nullopt;
  return static_cast<std::size_t>(it - leads.begin());
}

void EcgRecord::validate() const {
  if (data.rows() != leads.size()) {
    throw InvalidSignal("record '" + record_id + "' has " + std::to_string(data.rows()) +
                        " rows but " + std::to_string(leads.size()) + " lead labels");
  }
  if (!(fs > 0.0) || !std::isfinite(fs)) {
    throw InvalidSignal("record '" + record_id + "' has non-positive sampling rate");
  }
  require_finite(data.flat(), "record samples");
}

EcgRecord make_record(Matrix data, double fs, std::vector<LeadId> leads, std::string record_id) {
  if (data.rows() != leads.size()) {
    throw InvalidSignal("row count " + std::to_string(data.rows()) + " != lead count " +
                        std::to_string(leads.size()));
  }
  std::vector<std::size_t> order(leads.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return leads[a] < leads[b]; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (leads[order[i]] == leads[order[i - 1]]) {
      throw InvalidSignal("duplicate lead " + std::string(leads[order[i]].name()));
    }
  }

  EcgRecord rec;
  rec.fs = fs;
  rec.record_id = std::move(record_id);
  rec.data = Matrix(data.rows(), data.cols());
  rec.leads.reserve(leads.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    auto src = data.row(order[r]);
    std::copy(src.begin(), src.end(), rec.data.row(r).begin());
    rec.leads.push_back(leads[order[r]]);
  }
  rec.validate();
  return rec;
}

std::string_view to_string(PaddingStrategy s) { return s == PaddingStrategy::Zero ? "zero" : "copy"; }

PaddingStrategy padding_from_string(std::string_view s) {
  if (iequals(s, "zero") || iequals(s, "zeros")) return PaddingStrategy::Zero;
  if (iequals(s, "copy")) return PaddingStrategy::Copy;
  throw UsageError("unknown padding strategy '" + std::string(s) + "' (expected zero|copy)");
}

Matrix apply_padding(std::span<const double> single_lead, LeadId lead, PaddingStrategy strategy) {
  require_finite(single_lead, "apply_padding");
  Matrix out(kNumLeads, single_lead.size());
  for (std::size_t r = 0; r < kNumLeads; ++r) {
    if (strategy == PaddingStrategy::Copy || r == lead.index()) {
      std::copy(single_lead.begin(), single_lead.end(), out.row(r).begin());
    }
  }
  return out;
}

std::vector<double> extract_lead(const EcgRecord& rec, LeadId lead) {
  auto row = rec.row_of(lead);
  if (!row) {
    throw LeadNotFound("lead " + std::string(lead.name()) + " not present in record '" +
                       rec.record_id + "'");
  }
  auto r = rec.data.row(*row);
  return {r.begin(), r.end()};
}

SegmentPlan plan_segments(std::size_t length, std::size_t segment_len) {
  if (length == 0) throw EmptySignal("cannot segment a zero-length signal");
  if (segment_len == 0) throw UsageError("segment length must be positive");
  SegmentPlan plan;
  plan.segment_len = segment_len;
  const std::size_t count = (length + segment_len - 1) / segment_len;
  plan.segments.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t start = i * segment_len;
    const std::size_t end = std::min(start + segment_len, length);
    plan.segments.push_back({start, end, segment_len - (end - start)});
  }
  return plan;
}

std::vector<Matrix> split(const Matrix& data, const SegmentPlan& plan) {
  if (data.cols() != plan.length()) {
    throw PlanMismatch("matrix has " + std::to_string(data.cols()) + " columns, plan covers " +
                       std::to_string(plan.length()));
  }
  std::vector<Matrix> out;
  out.reserve(plan.segments.size());
  for (const auto& seg : plan.segments) {
    Matrix m(data.rows(), plan.segment_len, plan.pad_value);
    for (std::size_t r = 0; r < data.rows(); ++r) {
      auto src = data.row(r).subspan(seg.start, seg.end - seg.start);
      std::copy(src.begin(), src.end(), m.row(r).begin());
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<std::vector<double>> split(std::span<const double> lead, const SegmentPlan& plan) {
  Matrix m(1, lead.size());
  std::copy(lead.begin(), lead.end(), m.row(0).begin());
  std::vector<std::vector<double>> out;
  for (auto& seg : split(m, plan)) {
    auto r = seg.row(0);
    out.emplace_back(r.begin(), r.end());
  }
  return out;
}

Matrix reassemble(std::span<const Matrix> segments, const SegmentPlan& plan) {
  if (segments.size() != plan.segments.size()) {
    throw PlanMismatch("got " + std::to_string(segments.size()) + " segments, plan expects " +
                       std::to_string(plan.segments.size()));
  }
  if (segments.empty()) return {};
  const std::size_t rows = segments.front().rows();
  Matrix out(rows, plan.length());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = plan.segments[i];
    const auto& m = segments[i];
    if (m.rows() != rows || m.cols() != plan.segment_len) {
      throw PlanMismatch("segment " + std::to_string(i) + " is " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                         std::to_string(plan.segment_len));
    }
    for (std::size_t r = 0; r < rows; ++r) {
      auto src = m.row(r).first(seg.end - seg.start);
      std::copy(src.begin(), src.end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(seg.start));
    }
  }
  return out;
}

}  // namespace mcma
