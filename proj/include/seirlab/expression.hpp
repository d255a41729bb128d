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

#ifndef SEIRLAB_EXPRESSION_HPP
#define SEIRLAB_EXPRESSION_HPP

#include <memory>
#include <string>

namespace seir
{

/**
 * Arithmetic expression in the variables u, v and t, e.g. "1+0.5*cos(2*pi*u)".
 * Supports + - * / ^, parentheses, the constants pi and e, and the functions
 * sin cos tan exp log sqrt abs tanh.
 */
class Expression
{
public:
    struct Node;

    static Expression parse(const std::string& text);

    double operator()(double u, double v = 0.0, double t = 0.0) const;

    const std::string& text() const
    {
        return m_text;
    }

private:
    std::shared_ptr<const Node> m_root;
    std::string m_text;
};

} // namespace seir

#endif // SEIRLAB_EXPRESSION_HPP
