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

#include "seirlab/expression.hpp"
#include "seirlab/error.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <vector>

namespace seir
{

struct Expression::Node {
    enum class Kind
    {
        Number,
        VarU,
        VarV,
        VarT,
        Neg,
        Add,
        Sub,
        Mul,
        Div,
        Pow,
        Call
    };
    Kind kind    = Kind::Number;
    double value = 0.0;
    double (*fn)(double) = nullptr;
    std::shared_ptr<const Node> lhs, rhs;

    double eval(double u, double v, double t) const
    {
        switch (kind) {
        case Kind::Number:
            return value;
        case Kind::VarU:
            return u;
        case Kind::VarV:
            return v;
        case Kind::VarT:
            return t;
        case Kind::Neg:
            return -lhs->eval(u, v, t);
        case Kind::Add:
            return lhs->eval(u, v, t) + rhs->eval(u, v, t);
        case Kind::Sub:
            return lhs->eval(u, v, t) - rhs->eval(u, v, t);
        case Kind::Mul:
            return lhs->eval(u, v, t) * rhs->eval(u, v, t);
        case Kind::Div:
            return lhs->eval(u, v, t) / rhs->eval(u, v, t);
        case Kind::Pow:
            return std::pow(lhs->eval(u, v, t), rhs->eval(u, v, t));
        case Kind::Call:
            return fn(lhs->eval(u, v, t));
        }
        return 0.0;
    }
};

namespace
{

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind    = Expression::Node::Kind;

NodePtr make(Kind kind, NodePtr lhs = nullptr, NodePtr rhs = nullptr)
{
    auto n  = std::make_shared<Expression::Node>();
    n->kind = kind;
    n->lhs  = std::move(lhs);
    n->rhs  = std::move(rhs);
    return n;
}

NodePtr number(double value)
{
    auto n   = std::make_shared<Expression::Node>();
    n->value = value;
    return n;
}

double fabs_(double x)
{
    return std::fabs(x);
}

struct Function {
    const char* name;
    double (*fn)(double);
};

const Function functions[] = {
    {"sin", [](double x) { return std::sin(x); }},   {"cos", [](double x) { return std::cos(x); }},
    {"tan", [](double x) { return std::tan(x); }},   {"exp", [](double x) { return std::exp(x); }},
    {"log", [](double x) { return std::log(x); }},   {"sqrt", [](double x) { return std::sqrt(x); }},
    {"abs", fabs_},                                   {"tanh", [](double x) { return std::tanh(x); }},
};

// expr   := term (('+'|'-') term)*
// term   := unary (('*'|'/') unary)*
// unary  := '-' unary | '+' unary | power
// power  := atom ('^' unary)?
// atom   := number | name | name '(' expr ')' | '(' expr ')'
class Parser
{
public:
    explicit Parser(const std::string& text)
        : m_s(text)
    {
    }

    NodePtr parse()
    {
        NodePtr e = expr();
        skip();
        if (m_pos != m_s.size()) {
            fail("unexpected trailing input");
        }
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& why) const
    {
        throw Error(ErrorCode::ParseError, why + " at position " + std::to_string(m_pos) + " in '" + m_s + "'");
    }

    void skip()
    {
        while (m_pos < m_s.size() && std::isspace(static_cast<unsigned char>(m_s[m_pos]))) {
            ++m_pos;
        }
    }

    bool accept(char c)
    {
        skip();
        if (m_pos < m_s.size() && m_s[m_pos] == c) {
            ++m_pos;
            return true;
        }
        return false;
    }

    NodePtr expr()
    {
        NodePtr lhs = term();
        for (;;) {
            if (accept('+')) {
                lhs = make(Kind::Add, lhs, term());
            }
            else if (accept('-')) {
                lhs = make(Kind::Sub, lhs, term());
            }
            else {
                return lhs;
            }
        }
    }

    NodePtr term()
    {
        NodePtr lhs = unary();
        for (;;) {
            if (accept('*')) {
                lhs = make(Kind::Mul, lhs, unary());
            }
            else if (accept('/')) {
                lhs = make(Kind::Div, lhs, unary());
            }
            else {
                return lhs;
            }
        }
    }

    NodePtr unary()
    {
        if (accept('-')) {
            return make(Kind::Neg, unary());
        }
        if (accept('+')) {
            return unary();
        }
        NodePtr base = atom();
        if (accept('^')) {
            return make(Kind::Pow, base, unary());
        }
        return base;
    }

    NodePtr atom()
    {
        skip();
        if (m_pos >= m_s.size()) {
            fail("unexpected end of input");
        }
        const char c = m_s[m_pos];
        if (accept('(')) {
            NodePtr e = expr();
            if (!accept(')')) {
                fail("expected ')'");
            }
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t used = 0;
            double value     = 0.0;
            try {
                value = std::stod(m_s.substr(m_pos), &used);
            }
            catch (const std::exception&) {
                fail("malformed number");
            }
            m_pos += used;
            return number(value);
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t start = m_pos;
            while (m_pos < m_s.size() && (std::isalnum(static_cast<unsigned char>(m_s[m_pos])) || m_s[m_pos] == '_')) {
                ++m_pos;
            }
            const std::string name = m_s.substr(start, m_pos - start);
            if (name == "u" || name == "x") {
                return make(Kind::VarU);
            }
            if (name == "v" || name == "y") {
                return make(Kind::VarV);
            }
            if (name == "t") {
                return make(Kind::VarT);
            }
            if (name == "pi") {
                return number(std::numbers::pi);
            }
            if (name == "e") {
                return number(std::numbers::e);
            }
            for (const auto& f : functions) {
                if (name == f.name) {
                    if (!accept('(')) {
                        fail("expected '(' after " + name);
                    }
                    NodePtr arg = expr();
                    if (!accept(')')) {
                        fail("expected ')'");
                    }
                    auto n  = std::make_shared<Expression::Node>();
                    n->kind = Kind::Call;
                    n->fn   = f.fn;
                    n->lhs  = std::move(arg);
                    return n;
                }
            }
            fail("unknown name '" + name + "'");
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    const std::string& m_s;
    std::size_t m_pos = 0;
};

} // namespace

Expression Expression::parse(const std::string& text)
{
    Expression e;
    e.m_text = text;
    e.m_root = Parser(e.m_text).parse();
    return e;
}

double Expression::operator()(double u, double v, double t) const
{
    return m_root->eval(u, v, t);
}

} // namespace seir
