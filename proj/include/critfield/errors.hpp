#pragma once
#include <stdexcept>
#include <string>

namespace critfield {

// Base for every library error; kind() is a stable tag used by the CLI
// to map failures onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define CRITFIELD_ERROR(Name)                                   \
  class Name : public Error {                                   \
   public:                                                      \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  };

CRITFIELD_ERROR(InvalidArgument)
CRITFIELD_ERROR(InsufficientSmoothness)
CRITFIELD_ERROR(DegenerateJoint)
CRITFIELD_ERROR(UnsupportedDimension)
CRITFIELD_ERROR(LatticeTooLarge)
CRITFIELD_ERROR(BandwidthRateViolation)
CRITFIELD_ERROR(OutOfWindow)
CRITFIELD_ERROR(NonPositiveValues)
CRITFIELD_ERROR(EmptyPattern)
CRITFIELD_ERROR(IntegrabilityViolation)
CRITFIELD_ERROR(DegenerateField)

#undef CRITFIELD_ERROR

}  // namespace critfield
