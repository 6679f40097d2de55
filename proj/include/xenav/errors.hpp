#pragma once

#include <stdexcept>
#include <string>

namespace xenav {

/// Base of every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

#define XENAV_DEFINE_ERROR(Name)                                                                   \
    class Name : public Error                                                                      \
    {                                                                                              \
    public:                                                                                        \
        using Error::Error;                                                                        \
    }

XENAV_DEFINE_ERROR(RangeError);
XENAV_DEFINE_ERROR(LookupError);
XENAV_DEFINE_ERROR(IndexError);
XENAV_DEFINE_ERROR(ParseError);
XENAV_DEFINE_ERROR(ValidationError);
XENAV_DEFINE_ERROR(GenerationError);
XENAV_DEFINE_ERROR(StateError);
XENAV_DEFINE_ERROR(PlacementError);
XENAV_DEFINE_ERROR(TaskError);
XENAV_DEFINE_ERROR(UnreachableError);
XENAV_DEFINE_ERROR(ArgumentError);
XENAV_DEFINE_ERROR(CorruptionError);
XENAV_DEFINE_ERROR(ProtocolError);
XENAV_DEFINE_ERROR(IoError);
XENAV_DEFINE_ERROR(ConnectError);
XENAV_DEFINE_ERROR(TimeoutError);

#undef XENAV_DEFINE_ERROR

} // namespace xenav
