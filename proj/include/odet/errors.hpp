#pragma once

#include <stdexcept>
#include <string>

namespace odet {

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// field / jet evaluation
struct OutOfDomainError : Error { using Error::Error; };
struct NonFiniteError : Error { using Error::Error; };

// level-curve tracing
struct NoZeroSetError : Error { using Error::Error; };
struct NotClosedError : Error { using Error::Error; };
struct DegenerateGradientError : Error { using Error::Error; };

// equations
struct InadmissibleJetError : Error { using Error::Error; };
struct BadAnisotropyError : Error { using Error::Error; };
struct NonPositiveFError : Error { using Error::Error; };

// canonical families
struct OutOfRangeError : Error { using Error::Error; };
struct NoConvergenceError : Error { using Error::Error; };
struct MixedSignatureError : Error { using Error::Error; };

// overdetermined data
struct NotConvexError : Error { using Error::Error; };
struct IncompleteCoverageError : Error { using Error::Error; };

// index machinery
struct SingularLambdaError : Error { using Error::Error; };
struct InsufficientSamplingError : Error { using Error::Error; };

// solver
struct InadmissibleIterateError : Error { using Error::Error; };

// cli / io
struct ConfigError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct UnknownIdError : Error { using Error::Error; };

} // namespace odet
