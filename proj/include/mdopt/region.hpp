#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace mdopt {

using Point = std::vector<double>;
using ScalarField = std::function<double(std::span<const double>)>;

// Inequality constraint g(x) >= 0.
struct Constraint {
    std::string name;
    ScalarField g;
};

struct MeasureEstimate {
    double value = 0.0;
    double error = 0.0;
};

// Axis-aligned box intersected with constraints g_i(x) >= 0. The box is
// closed. Immutable once constructed.
class CompactRegion {
public:
    CompactRegion(std::vector<double> lower, std::vector<double> upper,
                  std::vector<Constraint> constraints = {})
        : lower_(std::move(lower)), upper_(std::move(upper)), constraints_(std::move(constraints)) {
        if (lower_.empty()) throw InputError("region: dimension must be positive");
        if (lower_.size() != upper_.size())
            throw InputError("region: lower and upper bounds differ in length");
        for (std::size_t j = 0; j < lower_.size(); ++j) {
            if (!std::isfinite(lower_[j]) || !std::isfinite(upper_[j]) || !(lower_[j] < upper_[j]))
                throw InputError("region: need finite lower[j] < upper[j] on axis " +
                                 std::to_string(j));
        }
        for (const auto& c : constraints_)
            if (!c.g) throw InputError("region: constraint '" + c.name + "' has no function");
        if (!constraints_.empty()) validate_nonempty();
    }

    std::size_t dim() const noexcept { return lower_.size(); }
    const std::vector<double>& lower() const noexcept { return lower_; }
    const std::vector<double>& upper() const noexcept { return upper_; }
    const std::vector<Constraint>& constraints() const noexcept { return constraints_; }
    bool has_constraints() const noexcept { return !constraints_.empty(); }

    double box_volume() const noexcept {
        double v = 1.0;
        for (std::size_t j = 0; j < dim(); ++j) v *= upper_[j] - lower_[j];
        return v;
    }

    bool contains(std::span<const double> x) const {
        if (x.size() != dim())
            throw InputError("contains: point has dimension " + std::to_string(x.size()) +
                             ", region has " + std::to_string(dim()));
        return contains_unchecked(x);
    }

    bool contains_unchecked(std::span<const double> x) const {
        for (std::size_t j = 0; j < dim(); ++j)
            if (!(x[j] >= lower_[j] && x[j] <= upper_[j])) return false;
        return satisfies_constraints(x);
    }

    bool satisfies_constraints(std::span<const double> x) const {
        for (const auto& c : constraints_)
            if (!(c.g(x) >= 0.0)) return false;
        return true;
    }

private:
    void validate_nonempty() const {
        const std::size_t n = dim();
        std::size_t per_axis = 2;
        while (std::pow(static_cast<double>(per_axis + 1), static_cast<double>(n)) <= (1 << 18) &&
               per_axis < 256)
            ++per_axis;
        std::size_t total = 1;
        for (std::size_t j = 0; j < n; ++j) total *= per_axis;
        Point x(n);
        for (std::size_t flat = 0; flat < total; ++flat) {
            std::size_t rem = flat;
            for (std::size_t j = n; j-- > 0;) {
                const std::size_t i = rem % per_axis;
                rem /= per_axis;
                x[j] = lower_[j] + (static_cast<double>(i) + 0.5) * (upper_[j] - lower_[j]) /
                                       static_cast<double>(per_axis);
            }
            if (satisfies_constraints(x)) return;
        }
        throw EmptyRegionError("region: no probe point satisfies the constraints");
    }

    std::vector<double> lower_;
    std::vector<double> upper_;
    std::vector<Constraint> constraints_;
};

// Cell-centered tensor grid restricted to region members. Nodes are stored
// row-major over the axis grid (axis 0 slowest), so two meshes with the same
// region and resolution are comparable index by index.
class GridMesh {
public:
    static constexpr std::int64_t npos = -1;

    GridMesh(CompactRegion region, std::vector<std::size_t> resolution)
        : region_(std::move(region)), resolution_(std::move(resolution)) {
        const std::size_t n = region_.dim();
        if (resolution_.size() != n)
            throw InputError("build_grid: resolution has " + std::to_string(resolution_.size()) +
                             " entries for a " + std::to_string(n) + "-dimensional region");
        std::size_t cells = 1;
        for (std::size_t r : resolution_) {
            if (r < 2) throw InputError("build_grid: resolution must be >= 2 on every axis");
            if (cells > (std::size_t{1} << 30) / r)
                throw InputError("build_grid: grid too large");
            cells *= r;
        }
        spacing_.resize(n);
        cell_volume_ = 1.0;
        for (std::size_t j = 0; j < n; ++j) {
            spacing_[j] = (region_.upper()[j] - region_.lower()[j]) / static_cast<double>(resolution_[j]);
            cell_volume_ *= spacing_[j];
        }

        std::vector<std::uint8_t> member(cells, 1);
        if (region_.has_constraints()) {
            parallel_for(cells, [&](std::size_t flat) {
                Point x(n);
                cell_center(flat, x);
                member[flat] = region_.satisfies_constraints(x) ? 1 : 0;
            });
        }
        slot_.assign(cells, npos);
        std::size_t count = 0;
        for (std::size_t flat = 0; flat < cells; ++flat)
            if (member[flat]) slot_[flat] = static_cast<std::int64_t>(count++);
        cell_of_node_.resize(count);
        coords_.resize(count * n);
        for (std::size_t flat = 0; flat < cells; ++flat) {
            if (slot_[flat] == npos) continue;
            const auto s = static_cast<std::size_t>(slot_[flat]);
            cell_of_node_[s] = flat;
            cell_center(flat, std::span<double>(coords_.data() + s * n, n));
        }
        if (count == 0) throw EmptyRegionError("build_grid: no grid node lies inside the region");
    }

    const CompactRegion& region() const noexcept { return region_; }
    const std::vector<std::size_t>& resolution() const noexcept { return resolution_; }
    const std::vector<double>& spacing() const noexcept { return spacing_; }
    double cell_volume() const noexcept { return cell_volume_; }
    std::size_t dim() const noexcept { return region_.dim(); }
    std::size_t size() const noexcept { return cell_of_node_.size(); }
    std::size_t cell_count() const noexcept { return slot_.size(); }

    std::span<const double> node(std::size_t i) const {
        return {coords_.data() + i * dim(), dim()};
    }
    std::span<const double> coordinates() const noexcept { return coords_; }

    // Index of the node one cell away along `axis` (direction +1 or -1), or
    // npos when that cell is outside the box or filtered out.
    std::int64_t neighbor(std::size_t i, std::size_t axis, int direction) const {
        std::size_t flat = cell_of_node_[i];
        std::size_t stride = 1;
        for (std::size_t j = dim() - 1; j > axis; --j) stride *= resolution_[j];
        const std::size_t coord = (flat / stride) % resolution_[axis];
        if (direction > 0) {
            if (coord + 1 >= resolution_[axis]) return npos;
            flat += stride;
        } else {
            if (coord == 0) return npos;
            flat -= stride;
        }
        return slot_[flat];
    }

    // Same region bounds, constraint names and resolution.
    bool same_layout(const GridMesh& other) const {
        if (resolution_ != other.resolution_ || size() != other.size()) return false;
        if (region_.lower() != other.region_.lower() || region_.upper() != other.region_.upper())
            return false;
        const auto& a = region_.constraints();
        const auto& b = other.region_.constraints();
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (a[i].name != b[i].name) return false;
        return true;
    }

private:
    void cell_center(std::size_t flat, std::span<double> x) const {
        for (std::size_t j = dim(); j-- > 0;) {
            const std::size_t i = flat % resolution_[j];
            flat /= resolution_[j];
            x[j] = region_.lower()[j] + (static_cast<double>(i) + 0.5) * spacing_[j];
        }
    }

    CompactRegion region_;
    std::vector<std::size_t> resolution_;
    std::vector<double> spacing_;
    double cell_volume_ = 0.0;
    std::vector<double> coords_;
    std::vector<std::size_t> cell_of_node_;
    std::vector<std::int64_t> slot_;
};

inline GridMesh build_grid(const CompactRegion& region, std::vector<std::size_t> resolution) {
    return GridMesh(region, std::move(resolution));
}

// Uniform point in the bounding box for candidate number `counter`.
inline void box_candidate(const CompactRegion& region, std::uint64_t seed, std::uint64_t counter,
                          std::span<double> x) {
    const std::size_t n = region.dim();
    for (std::size_t j = 0; j < n; ++j) {
        const double u = counter_uniform(seed, counter * n + j);
        x[j] = region.lower()[j] + u * (region.upper()[j] - region.lower()[j]);
    }
}

// n uniform members of the region by rejection from the box. Candidate c is a
// pure function of (seed, c), so the result does not depend on threading.
inline std::vector<Point> sample_uniform(const CompactRegion& region, std::size_t n,
                                         std::uint64_t seed) {
    if (n < 1) throw InputError("sample_uniform: n must be >= 1");
    constexpr std::uint64_t trial_batch = std::uint64_t{1} << 20;
    const std::size_t d = region.dim();
    std::vector<Point> out;
    out.reserve(n);
    std::uint64_t next = 0;
    std::uint64_t tried = 0;
    std::uint64_t accepted_in_window = 0;
    while (out.size() < n) {
        const std::size_t want = n - out.size();
        const std::size_t batch = std::max<std::size_t>(1024, want + want / 4);
        std::vector<double> coords(batch * d);
        std::vector<std::uint8_t> ok(batch, 0);
        parallel_for(batch, [&](std::size_t i) {
            std::span<double> x(coords.data() + i * d, d);
            box_candidate(region, seed, next + i, x);
            ok[i] = region.satisfies_constraints(x) ? 1 : 0;
        });
        for (std::size_t i = 0; i < batch && out.size() < n; ++i) {
            ++tried;
            if (ok[i]) {
                ++accepted_in_window;
                out.emplace_back(coords.begin() + static_cast<std::ptrdiff_t>(i * d),
                                 coords.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
            }
            if (tried == trial_batch) {
                if (static_cast<double>(accepted_in_window) < 1e-6 * static_cast<double>(trial_batch))
                    throw InfeasibleRegionError("sample_uniform: acceptance rate below 1e-6");
                tried = 0;
                accepted_in_window = 0;
            }
        }
        next += batch;
    }
    return out;
}

}  // namespace mdopt
