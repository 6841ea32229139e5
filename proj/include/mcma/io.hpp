#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcma/signal.hpp"

namespace mcma {

/// ECGB1 container: "ECGB1", u16 version, u32 fs, u8 n_leads, u32 n_samples,
/// n_leads lead-index bytes, then little-endian float32 samples, lead-major.
inline constexpr std::uint16_t kEcgB1Version = 1;
inline constexpr std::size_t kEcgB1HeaderSize = 5 + 2 + 4 + 1 + 4;

/// Throws NotEcgB1 on a foreign file and CorruptFile when the declared sizes,
/// lead bytes or samples are inconsistent. The record id is the file stem.
EcgRecord read_ecgb1(const std::string& path);
/// fs must be a positive integer; throws InvalidSignal otherwise.
void write_ecgb1(const EcgRecord& rec, const std::string& path);

/// Comma-separated, one header row of lead names, one row per sample.
/// Throws UnknownLead (listing every offending column) or MalformedCsv.
EcgRecord read_csv(const std::string& path, double fs);
void write_csv(const EcgRecord& rec, const std::string& path);

/// Reads every *.ecgb1 file in `dir`, sorted by file name. Throws
/// EmptyDataset when there are none.
std::vector<EcgRecord> load_corpus(const std::string& dir);

/// Chooses the reader from the extension (.ecgb1 or .csv).
EcgRecord read_record(const std::string& path, double csv_fs = 500.0);

}  // namespace mcma
