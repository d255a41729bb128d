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

#ifndef SEIRLAB_ERROR_HPP
#define SEIRLAB_ERROR_HPP

#include <stdexcept>
#include <string>

namespace seir
{

enum class ErrorCode
{
    NonPositiveRate,
    InvalidInitialLaw,
    ProductFormMismatch,
    InvalidExponent,
    GridMismatch,
    CenteringUnavailable,
    TooLarge,
    StepSizeTooCoarse,
    NotReasonable,
    AdmissibilityLost,
    OutOfRange,
    NotMonotone,
    LogDomain,
    DomainViolation,
    NotAdmissible,
    VarianceBlowup,
    SingularPropagator,
    MethodsDisagree,
    DegenerateDenominator,
    DegenerateFit,
    InvalidArgument,
    ParseError,
    IoError,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what)
        , m_code(code)
    {
    }

    ErrorCode code() const
    {
        return m_code;
    }

private:
    ErrorCode m_code;
};

} // namespace seir

#endif // SEIRLAB_ERROR_HPP
