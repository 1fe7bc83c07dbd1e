#pragma once

#include <stdexcept>
#include <string>

namespace themescope {

/// Base of every domain error raised by the toolkit. The CLI maps these to
/// exit code 1; the service maps them to 4xx responses.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define THEMESCOPE_DEFINE_ERROR(Name)                                        \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& message) : Error(#Name, message) {} \
    }

THEMESCOPE_DEFINE_ERROR(ManifestError);
THEMESCOPE_DEFINE_ERROR(EmptyDocumentError);
THEMESCOPE_DEFINE_ERROR(EmptyVocabularyError);
THEMESCOPE_DEFINE_ERROR(EmptyCorpusError);
THEMESCOPE_DEFINE_ERROR(RowCountMismatch);
THEMESCOPE_DEFINE_ERROR(FormatError);
THEMESCOPE_DEFINE_ERROR(ZeroVectorError);
THEMESCOPE_DEFINE_ERROR(ParamError);
THEMESCOPE_DEFINE_ERROR(NoTopicsFound);
THEMESCOPE_DEFINE_ERROR(TooManyThemes);
THEMESCOPE_DEFINE_ERROR(InconsistentAssignment);
THEMESCOPE_DEFINE_ERROR(NotFound);
THEMESCOPE_DEFINE_ERROR(EmptyInputError);
THEMESCOPE_DEFINE_ERROR(ReferentialError);
THEMESCOPE_DEFINE_ERROR(PlacementError);
THEMESCOPE_DEFINE_ERROR(IoError);
THEMESCOPE_DEFINE_ERROR(MissingStageError);

#undef THEMESCOPE_DEFINE_ERROR

}  // namespace themescope
