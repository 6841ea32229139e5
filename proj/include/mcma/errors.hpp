#pragma once

#include <stdexcept>
#include <string>

namespace mcma {

// Every error raised by the library belongs to one of three families. The CLI
// maps them onto its exit codes (usage 1, data 2, numeric divergence 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

#define MCMA_DEFINE_ERROR(Name, Base)                              \
  class Name : public Base {                                       \
   public:                                                         \
    explicit Name(const std::string& what) : Base(#Name ": " + what) {} \
  }

// signal-core
MCMA_DEFINE_ERROR(InvalidSignal, DataError);
MCMA_DEFINE_ERROR(LeadNotFound, DataError);
MCMA_DEFINE_ERROR(EmptySignal, DataError);
MCMA_DEFINE_ERROR(PlanMismatch, DataError);

// tensor-autograd
MCMA_DEFINE_ERROR(ShapeError, DataError);
MCMA_DEFINE_ERROR(DegenerateNorm, DataError);
MCMA_DEFINE_ERROR(NotScalar, DataError);
MCMA_DEFINE_ERROR(NoGradient, DataError);

// mcma-model
MCMA_DEFINE_ERROR(ConfigError, UsageError);
MCMA_DEFINE_ERROR(IncompatibleCheckpoint, DataError);
MCMA_DEFINE_ERROR(CorruptCheckpoint, DataError);

// training
MCMA_DEFINE_ERROR(EmptyDataset, DataError);
MCMA_DEFINE_ERROR(DivergedTraining, NumericError);

// ecggeneval
MCMA_DEFINE_ERROR(UndefinedCorrelation, DataError);
MCMA_DEFINE_ERROR(InsufficientPeaks, DataError);
MCMA_DEFINE_ERROR(NoFeasibleLeads, DataError);
MCMA_DEFINE_ERROR(UnknownClass, DataError);
MCMA_DEFINE_ERROR(ClassMismatch, DataError);
MCMA_DEFINE_ERROR(RecordMismatch, DataError);

// data-io
MCMA_DEFINE_ERROR(NotEcgB1, DataError);
MCMA_DEFINE_ERROR(CorruptFile, DataError);
MCMA_DEFINE_ERROR(MalformedCsv, DataError);
MCMA_DEFINE_ERROR(UnknownLead, DataError);
MCMA_DEFINE_ERROR(IoError, DataError);

#undef MCMA_DEFINE_ERROR

}  // namespace mcma
