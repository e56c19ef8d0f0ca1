#pragma once

#include <stdexcept>
#include <string>

namespace choicecheck {

// Every failure raised by the library derives from Error so callers (the CLI
// in particular) can separate input problems from programming errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CHOICECHECK_DEFINE_ERROR(Name)          \
  class Name : public Error {                   \
   public:                                      \
    using Error::Error;                         \
  };

CHOICECHECK_DEFINE_ERROR(SchemaError)
CHOICECHECK_DEFINE_ERROR(ParseError)
CHOICECHECK_DEFINE_ERROR(ValidationError)
CHOICECHECK_DEFINE_ERROR(SpecError)
CHOICECHECK_DEFINE_ERROR(DimensionError)
CHOICECHECK_DEFINE_ERROR(DomainError)
CHOICECHECK_DEFINE_ERROR(SingularDesignError)
CHOICECHECK_DEFINE_ERROR(DecompositionError)
CHOICECHECK_DEFINE_ERROR(BinningError)
CHOICECHECK_DEFINE_ERROR(CheckError)
CHOICECHECK_DEFINE_ERROR(LabelingError)
CHOICECHECK_DEFINE_ERROR(CoverageError)
CHOICECHECK_DEFINE_ERROR(IoError)

#undef CHOICECHECK_DEFINE_ERROR

}  // namespace choicecheck
