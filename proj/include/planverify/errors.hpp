#pragma once

#include <stdexcept>
#include <string>

namespace planverify {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PLANVERIFY_ERROR_TYPE(Name)     \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  };

// graph-core
PLANVERIFY_ERROR_TYPE(LengthMismatch)
PLANVERIFY_ERROR_TYPE(BadIndex)
PLANVERIFY_ERROR_TYPE(UnknownTool)
PLANVERIFY_ERROR_TYPE(SchemaError)

// tensor-nn
PLANVERIFY_ERROR_TYPE(ShapeMismatch)
PLANVERIFY_ERROR_TYPE(NotScalar)

// embedding / alignment
PLANVERIFY_ERROR_TYPE(ProviderError)
PLANVERIFY_ERROR_TYPE(EmptyTrainingSet)

// perturbation
PLANVERIFY_ERROR_TYPE(NoFeasibleReplacement)
PLANVERIFY_ERROR_TYPE(NoFeasibleSpan)
PLANVERIFY_ERROR_TYPE(NoFeasibleBridge)
PLANVERIFY_ERROR_TYPE(ExhaustedResampling)

// training / checkpoints
PLANVERIFY_ERROR_TYPE(NoPositiveLabels)
PLANVERIFY_ERROR_TYPE(VersionMismatch)
PLANVERIFY_ERROR_TYPE(CorruptFile)

// calibration
PLANVERIFY_ERROR_TYPE(NoPositives)

// correction
PLANVERIFY_ERROR_TYPE(CorrectorUnavailable)

// cli
PLANVERIFY_ERROR_TYPE(ConfigError)

#undef PLANVERIFY_ERROR_TYPE

}  // namespace planverify
