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

#ifndef SEIRLAB_SUM_TREE_HPP
#define SEIRLAB_SUM_TREE_HPP

#include <cstddef>
#include <vector>

namespace seir
{

/**
 * Complete binary tree of partial sums over nonnegative leaf weights.
 * Updates overwrite a leaf and recompute its ancestors from their children,
 * so the root never accumulates rounding drift.
 */
class SumTree
{
public:
    SumTree() = default;
    explicit SumTree(std::size_t n);

    void resize(std::size_t n);

    std::size_t size() const
    {
        return m_n;
    }

    void set(std::size_t i, double w);

    /// Replaces all leaves and rebuilds in O(n).
    void assign(const std::vector<double>& w);
    void clear();

    double weight(std::size_t i) const
    {
        return m_tree[m_cap + i];
    }

    double total() const
    {
        return m_tree[1];
    }

    /// Leaf index whose cumulative range contains x, for x in [0, total()). Never returns a zero-weight leaf.
    std::size_t find(double x) const;

    /// Plain left-to-right sum of the leaves.
    double recompute_total() const;

private:
    std::size_t m_n   = 0;
    std::size_t m_cap = 1;
    std::vector<double> m_tree = std::vector<double>(2, 0.0);
};

} // namespace seir

#endif // SEIRLAB_SUM_TREE_HPP
