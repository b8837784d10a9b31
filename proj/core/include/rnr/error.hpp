#pragma once

#include <stdexcept>
#include <string>

namespace rnr {

// Base class for all library errors. Subclasses carry no payload beyond the
// message; callers dispatch on type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// geometry
struct InvalidDepth final : Error { using Error::Error; };
struct DegenerateResize final : Error { using Error::Error; };

// encoder
struct AllPixelsInvalid final : Error { using Error::Error; };

// latent map
struct OutOfMap final : Error { using Error::Error; };
struct ShapeMismatch final : Error { using Error::Error; };
struct CorruptHeader final : Error { using Error::Error; };
struct VersionMismatch final : Error { using Error::Error; };
struct TruncatedPayload final : Error { using Error::Error; };

// localizer
struct EmptyKey final : Error { using Error::Error; };
struct EmptyQuery final : Error { using Error::Error; };
struct NoOverlap final : Error { using Error::Error; };

// particle filter
struct NoFreeSpace final : Error { using Error::Error; };
struct DegenerateWeights final : Error { using Error::Error; };
struct ZeroResultant final : Error { using Error::Error; };

// simulator
struct PoseOutOfBounds final : Error { using Error::Error; };
struct IoFailure final : Error { using Error::Error; };

// navigator
struct NoPath final : Error { using Error::Error; };
struct StartOccupied final : Error { using Error::Error; };
struct GoalOccupied final : Error { using Error::Error; };
struct GoalLocalizationFailed final : Error { using Error::Error; };

// cli
struct ConfigError final : Error { using Error::Error; };
struct DatasetMalformed final : Error { using Error::Error; };

}  // namespace rnr
