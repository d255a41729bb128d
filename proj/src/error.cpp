/*
* Copyright (C) 2026 seirlab contributors
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*     http://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
*/

#include "seirlab/error.hpp"

namespace seir
{

const char* to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::NonPositiveRate:
        return "NonPositiveRate";
    case ErrorCode::InvalidInitialLaw:
        return "InvalidInitialLaw";
    case ErrorCode::ProductFormMismatch:
        return "ProductFormMismatch";
    case ErrorCode::InvalidExponent:
        return "InvalidExponent";
    case ErrorCode::GridMismatch:
        return "GridMismatch";
    case ErrorCode::CenteringUnavailable:
        return "CenteringUnavailable";
    case ErrorCode::TooLarge:
        return "TooLarge";
    case ErrorCode::StepSizeTooCoarse:
        return "StepSizeTooCoarse";
    case ErrorCode::NotReasonable:
        return "NotReasonable";
    case ErrorCode::AdmissibilityLost:
        return "AdmissibilityLost";
    case ErrorCode::OutOfRange:
        return "OutOfRange";
    case ErrorCode::NotMonotone:
        return "NotMonotone";
    case ErrorCode::LogDomain:
        return "LogDomain";
    case ErrorCode::DomainViolation:
        return "DomainViolation";
    case ErrorCode::NotAdmissible:
        return "NotAdmissible";
    case ErrorCode::VarianceBlowup:
        return "VarianceBlowup";
    case ErrorCode::SingularPropagator:
        return "SingularPropagator";
    case ErrorCode::MethodsDisagree:
        return "MethodsDisagree";
    case ErrorCode::DegenerateDenominator:
        return "DegenerateDenominator";
    case ErrorCode::DegenerateFit:
        return "DegenerateFit";
    case ErrorCode::InvalidArgument:
        return "InvalidArgument";
    case ErrorCode::ParseError:
        return "ParseError";
    case ErrorCode::IoError:
        return "IoError";
    }
    return "Unknown";
}

} // namespace seir
