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

#include "seirlab/sum_tree.hpp"

#include <algorithm>

namespace seir
{

SumTree::SumTree(std::size_t n)
{
    resize(n);
}

void SumTree::resize(std::size_t n)
{
    m_n   = n;
    m_cap = 1;
    while (m_cap < std::max<std::size_t>(n, 1)) {
        m_cap <<= 1;
    }
    m_tree.assign(2 * m_cap, 0.0);
}

void SumTree::set(std::size_t i, double w)
{
    std::size_t k = m_cap + i;
    m_tree[k]     = w;
    for (k >>= 1; k >= 1; k >>= 1) {
        m_tree[k] = m_tree[2 * k] + m_tree[2 * k + 1];
    }
}

void SumTree::assign(const std::vector<double>& w)
{
    std::fill(m_tree.begin(), m_tree.end(), 0.0);
    std::copy(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(std::min(w.size(), m_n)),
              m_tree.begin() + static_cast<std::ptrdiff_t>(m_cap));
    for (std::size_t k = m_cap - 1; k >= 1; --k) {
        m_tree[k] = m_tree[2 * k] + m_tree[2 * k + 1];
    }
}

void SumTree::clear()
{
    std::fill(m_tree.begin(), m_tree.end(), 0.0);
}

std::size_t SumTree::find(double x) const
{
    std::size_t k = 1;
    while (k < m_cap) {
        const double left  = m_tree[2 * k];
        const double right = m_tree[2 * k + 1];
        if ((x < left && left > 0.0) || !(right > 0.0)) {
            k = 2 * k;
        }
        else {
            x -= left;
            k = 2 * k + 1;
        }
    }
    return k - m_cap;
}

double SumTree::recompute_total() const
{
    double s = 0.0;
    for (std::size_t i = 0; i < m_n; ++i) {
        s += m_tree[m_cap + i];
    }
    return s;
}

} // namespace seir
