#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mcma {

inline constexpr std::size_t kNumLeads = 12;
inline constexpr std::size_t kSegmentLen = 1024;

/// One of the twelve standard leads, indexed in the clinical order
/// I, II, III, aVR, aVL, aVF, V1..V6.
class LeadId {
 public:
  constexpr LeadId() = default;
  /// Throws UnknownLead for indices outside [0, 11].
  explicit LeadId(std::size_t index);

  /// Accepts the canonical spelling, case-insensitively ("avr" == "aVR").
  static LeadId from_name(std::string_view name);
  static std::optional<LeadId> try_from_name(std::string_view name);

  static std::array<LeadId, kNumLeads> all();

  constexpr std::size_t index() const { return index_; }
  std::string_view name() const;

  friend constexpr bool operator==(LeadId, LeadId) = default;
  friend constexpr auto operator<=>(LeadId, LeadId) = default;

 private:
  std::size_t index_ = 0;
};

/// Dense row-major matrix; rows are leads, columns are samples.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A multi-lead recording in millivolts. Samples are stored exactly as given;
/// nothing in the library rescales or filters them.
struct EcgRecord {
  Matrix data;
  double fs = 500.0;
  std::vector<LeadId> leads;
  std::string record_id;

  std::size_t length() const { return data.cols(); }
  std::size_t num_leads() const { return data.rows(); }
  std::optional<std::size_t> row_of(LeadId lead) const;

  /// Checks row/lead agreement, positive fs and finite samples. Throws
  /// InvalidSignal.
  void validate() const;
};

/// Builds a record and reorders its rows into clinical lead order. Duplicate
/// leads are rejected with InvalidSignal.
EcgRecord make_record(Matrix data, double fs, std::vector<LeadId> leads, std::string record_id);

enum class PaddingStrategy { Zero, Copy };

std::string_view to_string(PaddingStrategy s);
PaddingStrategy padding_from_string(std::string_view s);

struct Segment {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t pad_count = 0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct SegmentPlan {
  std::size_t segment_len = kSegmentLen;
  double pad_value = 0.0;
  std::vector<Segment> segments;

  std::size_t length() const { return segments.empty() ? 0 : segments.back().end; }
};

/// Embeds one lead into a 12-row matrix. Zero fills every other row with 0;
/// Copy repeats the lead into all 12 rows. Throws InvalidSignal on non-finite
/// samples.
Matrix apply_padding(std::span<const double> single_lead, LeadId lead, PaddingStrategy strategy);

/// Returns the unmodified row for `lead`; throws LeadNotFound.
std::vector<double> extract_lead(const EcgRecord& rec, LeadId lead);

/// ceil(length / segment_len) windows; only the last one is padded.
SegmentPlan plan_segments(std::size_t length, std::size_t segment_len = kSegmentLen);

/// Cuts a (leads x length) matrix into padded windows following `plan`.
std::vector<Matrix> split(const Matrix& data, const SegmentPlan& plan);
/// Single-lead variant of split.
std::vector<std::vector<double>> split(std::span<const double> lead, const SegmentPlan& plan);

/// Concatenates windows and drops the trailing pad columns. Throws
/// PlanMismatch when the segment count or width disagrees with the plan.
Matrix reassemble(std::span<const Matrix> segments, const SegmentPlan& plan);

}  // namespace mcma
