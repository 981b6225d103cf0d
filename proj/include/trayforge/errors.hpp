#pragma once

#include <stdexcept>
#include <string>

namespace trayforge {

/// Base class for all trayforge errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// File could not be read/written or is not syntactically valid.
struct ParseError : Error {
    using Error::Error;
};

/// A record violates a domain invariant; the message names the record.
struct ValidationError : Error {
    using Error::Error;
};

/// An instrument (plus x padding) is wider than the tray allows: N_max = 0.
struct WidthOverflowError : Error {
    explicit WidthOverflowError(const std::string& instrument_id, const std::string& msg)
        : Error(msg), instrument_id(instrument_id) {}
    std::string instrument_id;
};

/// Columns exceed the tray length even at the last merge level.
struct LengthOverflowError : Error {
    using Error::Error;
};

/// A single instrument layer exceeds the tray depth; no merge level can fix it.
struct DepthOverflowError : Error {
    explicit DepthOverflowError(const std::string& instrument_id, const std::string& msg)
        : Error(msg), instrument_id(instrument_id) {}
    std::string instrument_id;
};

/// Checklist references an id absent from the catalog.
struct UnknownInstrumentError : Error {
    using Error::Error;
};

/// Pose estimation was asked to run on a mask with no foreground pixels.
struct EmptyMaskError : Error {
    using Error::Error;
};

/// Homography is not invertible (or maps the query point to infinity).
struct SingularCalibrationError : Error {
    using Error::Error;
};

/// Contour has fewer than 3 points or zero area.
struct DegeneratePolygonError : Error {
    using Error::Error;
};

/// Sequencer received a detection after the plan completed.
struct AlreadyCompleteError : Error {
    using Error::Error;
};

/// Sequencer stage is at capacity and cannot buffer another instrument.
struct StageFullError : Error {
    using Error::Error;
};

/// Layout handed to the simulator fails validation.
struct InvalidLayoutError : Error {
    using Error::Error;
};

/// Rejection sampling could not find a non-overlapping placement.
struct PlacementSamplingExhaustedError : Error {
    using Error::Error;
};

/// Cohen's d is undefined: both standard deviations are zero.
struct ZeroVarianceError : Error {
    using Error::Error;
};

} // namespace trayforge
