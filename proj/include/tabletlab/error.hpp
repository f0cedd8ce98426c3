#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tabletlab {

enum class ErrorCode {
    // core
    FractionSumMismatch,
    NegativeFraction,
    DuplicateComponent,
    MultipleApis,
    NonPositiveDimension,
    NonPositiveInput,
    NonPositiveHeight,
    // physics
    NegativePressure,
    TargetAboveInitialPorosity,
    DegenerateB,
    PorosityOutOfRange,
    InsufficientData,
    SingularFit,
    NonPositiveStrength,
    EmptyData,
    // mixture
    UnknownMaterial,
    GridMismatch,
    BasisNotFitted,
    NonPositiveFFC,
    EmptyFormulation,
    // surrogate
    MissingDescriptors,
    NonPositiveTarget,
    EmptyDataset,
    NotTrained,
    HoldoutEmpty,
    // gp
    NotFitted,
    InvalidBounds,
    // formulator
    LoadingTooHigh,
    NoExcipientsAllowed,
    UnknownExcipient,
    // chemometrics
    EmptyRange,
    ZeroVariance,
    WindowTooSmall,
    ZeroVarianceComponent,
    TooFewSamples,
    UnpairedData,
    SingularSystem,
    ShapeMismatch,
    // plant
    TargetBelowLoss,
    MissingPureSpectrum,
    NonPositiveMass,
    PlantFailure,
    // mobo
    EmptyFeasibleRegion,
    // io / cli
    ParseError,
    ConfigParseError,
    UnknownMode,
    IoError,
};

constexpr std::string_view to_string(ErrorCode c) {
    switch (c) {
    case ErrorCode::FractionSumMismatch: return "FractionSumMismatch";
    case ErrorCode::NegativeFraction: return "NegativeFraction";
    case ErrorCode::DuplicateComponent: return "DuplicateComponent";
    case ErrorCode::MultipleApis: return "MultipleApis";
    case ErrorCode::NonPositiveDimension: return "NonPositiveDimension";
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::NonPositiveHeight: return "NonPositiveHeight";
    case ErrorCode::NegativePressure: return "NegativePressure";
    case ErrorCode::TargetAboveInitialPorosity: return "TargetAboveInitialPorosity";
    case ErrorCode::DegenerateB: return "DegenerateB";
    case ErrorCode::PorosityOutOfRange: return "PorosityOutOfRange";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::SingularFit: return "SingularFit";
    case ErrorCode::NonPositiveStrength: return "NonPositiveStrength";
    case ErrorCode::EmptyData: return "EmptyData";
    case ErrorCode::UnknownMaterial: return "UnknownMaterial";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::BasisNotFitted: return "BasisNotFitted";
    case ErrorCode::NonPositiveFFC: return "NonPositiveFFC";
    case ErrorCode::EmptyFormulation: return "EmptyFormulation";
    case ErrorCode::MissingDescriptors: return "MissingDescriptors";
    case ErrorCode::NonPositiveTarget: return "NonPositiveTarget";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::NotTrained: return "NotTrained";
    case ErrorCode::HoldoutEmpty: return "HoldoutEmpty";
    case ErrorCode::NotFitted: return "NotFitted";
    case ErrorCode::InvalidBounds: return "InvalidBounds";
    case ErrorCode::LoadingTooHigh: return "LoadingTooHigh";
    case ErrorCode::NoExcipientsAllowed: return "NoExcipientsAllowed";
    case ErrorCode::UnknownExcipient: return "UnknownExcipient";
    case ErrorCode::EmptyRange: return "EmptyRange";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::WindowTooSmall: return "WindowTooSmall";
    case ErrorCode::ZeroVarianceComponent: return "ZeroVarianceComponent";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::UnpairedData: return "UnpairedData";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::TargetBelowLoss: return "TargetBelowLoss";
    case ErrorCode::MissingPureSpectrum: return "MissingPureSpectrum";
    case ErrorCode::NonPositiveMass: return "NonPositiveMass";
    case ErrorCode::PlantFailure: return "PlantFailure";
    case ErrorCode::EmptyFeasibleRegion: return "EmptyFeasibleRegion";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigParseError: return "ConfigParseError";
    case ErrorCode::UnknownMode: return "UnknownMode";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Every failure in the library is reported as an Error carrying a code, so
/// callers can branch on the kind without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace tabletlab
