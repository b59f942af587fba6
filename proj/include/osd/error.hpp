// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace osd {

/// Root of every error thrown by the library. Subclasses name the failure
/// class so callers (and tests) can tell a shape problem from a numeric one.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define OSD_DEFINE_ERROR(Name)                   \
    class Name : public Error {                  \
    public:                                      \
        using Error::Error;                      \
    }

OSD_DEFINE_ERROR(ShapeError);
OSD_DEFINE_ERROR(StructuralError);
OSD_DEFINE_ERROR(DegenerateBasisError);
OSD_DEFINE_ERROR(UndefinedSimilarityError);
OSD_DEFINE_ERROR(EmptyMergeError);
OSD_DEFINE_ERROR(UnsupportedVariantError);
OSD_DEFINE_ERROR(EmptyLossError);
OSD_DEFINE_ERROR(EmptyCorpusError);
OSD_DEFINE_ERROR(CorpusError);
OSD_DEFINE_ERROR(ArgumentError);
OSD_DEFINE_ERROR(CapacityError);
OSD_DEFINE_ERROR(EmptyRelevantError);
OSD_DEFINE_ERROR(LookupError);
OSD_DEFINE_ERROR(ChecksumError);
OSD_DEFINE_ERROR(FormatError);
OSD_DEFINE_ERROR(IoError);
OSD_DEFINE_ERROR(DependencyError);
OSD_DEFINE_ERROR(ConfigError);

#undef OSD_DEFINE_ERROR

/// Raised when an iterative routine fails to converge or a value goes non-finite.
class NumericError : public Error {
public:
    NumericError(const std::string& what, long iterations = 0)
        : Error(what), iterations_(iterations) {}

    long iterations() const noexcept { return iterations_; }

private:
    long iterations_;
};

}  // namespace osd
