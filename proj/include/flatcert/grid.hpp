/**
 * @brief Uniform-grid scalar fields over balls in the (n-1)-dimensional base,
 * centered second-order stencils and the measurement primitives
 * (oscillation, Hoelder seminorm) used by the verification pipeline.
 */
#pragma once

#include "flatcert/format.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace flatcert {

namespace grid {

using Point = std::array<double, 2>;
using Index = std::array<int, 2>;

enum class NodeKind : std::uint8_t { exterior, boundary, interior };

inline double norm(const Point& p) { return std::sqrt(p[0] * p[0] + p[1] * p[1]); }

inline double distance(const Point& a, const Point& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    return std::sqrt(dx * dx + dy * dy);
}

/// Distance between two nodes whose index offset is (di, dj).
inline double node_distance(int di, int dj, double h) {
    return h * std::sqrt(static_cast<double>(di * di + dj * dj));
}

/**
 * A scalar field sampled at the nodes of the uniform grid h Z^d (d = 1 or 2)
 * that fall inside the closed ball of the given radius about the origin.
 *
 * Storage covers the full bounding box [-N, N]^d in row-major order (the
 * first index is the slow one). Nodes are classified as exterior (outside the
 * ball), interior (every node of the 3^d neighbourhood lies in the ball) or
 * boundary (the remaining in-ball nodes). Interior nodes therefore support all
 * centered stencils, including the mixed second difference.
 */
class GridFunction {
public:
    GridFunction() = default;

    GridFunction(int base_dim, double radius, double h) : dim_(base_dim), radius_(radius), h_(h) {
        if (base_dim != 1 && base_dim != 2) throw std::invalid_argument("base dimension must be 1 or 2");
        if (!(radius > 0) || !(h > 0) || !std::isfinite(radius) || !std::isfinite(h))
            throw std::invalid_argument("radius and h must be positive");
        const double rho = radius / h;
        if (rho > 1.0e5) throw std::invalid_argument("grid too fine");
        half_ = static_cast<int>(std::floor(rho * (1 + 1e-12)));
        side_ = 2 * half_ + 1;
        const std::size_t count = dim_ == 1 ? static_cast<std::size_t>(side_)
                                            : static_cast<std::size_t>(side_) * static_cast<std::size_t>(side_);
        values_.assign(count, 0.0);
        kind_.assign(count, NodeKind::exterior);
        const double rho2 = rho * rho * (1 + 1e-12);
        auto inside = [&](int i, int j) {
            if (std::abs(i) > half_ || std::abs(j) > half_) return false;
            return static_cast<double>(i) * i + static_cast<double>(j) * j <= rho2;
        };
        const int jl = dim_ == 1 ? 0 : -half_;
        const int jh = dim_ == 1 ? 0 : half_;
        for (int i = -half_; i <= half_; ++i) {
            for (int j = jl; j <= jh; ++j) {
                if (!inside(i, j)) continue;
                bool all = true;
                for (int a = -1; a <= 1 && all; ++a)
                    for (int b = (dim_ == 1 ? 0 : -1); b <= (dim_ == 1 ? 0 : 1) && all; ++b)
                        all = inside(i + a, j + b);
                kind_[flat(i, j)] = all ? NodeKind::interior : NodeKind::boundary;
            }
        }
        if (half_ < 1) throw std::invalid_argument("ball must contain more than one node");
    }

    /// Grid with the given number of nodes across a diameter (must be odd).
    static GridFunction with_nodes(int base_dim, double radius, int nodes_per_diameter) {
        if (nodes_per_diameter < 3 || nodes_per_diameter % 2 == 0)
            throw std::invalid_argument("nodes per diameter must be odd and >= 3");
        return GridFunction(base_dim, radius, 2.0 * radius / (nodes_per_diameter - 1));
    }

    /// Same node layout, values replaced by f(position) at in-ball nodes.
    template <class F>
    GridFunction& fill(F&& f) {
        for (std::size_t k = 0; k < size(); ++k)
            values_[k] = kind_[k] == NodeKind::exterior ? 0.0 : f(position(k));
        return *this;
    }

    [[nodiscard]] int base_dim() const { return dim_; }
    [[nodiscard]] double radius() const { return radius_; }
    [[nodiscard]] double h() const { return h_; }
    [[nodiscard]] int half_extent() const { return half_; }
    [[nodiscard]] int side() const { return side_; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }

    [[nodiscard]] bool same_layout(const GridFunction& o) const {
        return dim_ == o.dim_ && half_ == o.half_ && h_ == o.h_ && radius_ == o.radius_;
    }

    [[nodiscard]] bool contains(int i, int j) const {
        if (std::abs(i) > half_) return false;
        if (dim_ == 1) return j == 0;
        return std::abs(j) <= half_;
    }
    [[nodiscard]] std::size_t flat(int i, int j) const {
        return dim_ == 1 ? static_cast<std::size_t>(i + half_)
                         : static_cast<std::size_t>(i + half_) * side_ + static_cast<std::size_t>(j + half_);
    }
    [[nodiscard]] Index index(std::size_t k) const {
        if (dim_ == 1) return {static_cast<int>(k) - half_, 0};
        return {static_cast<int>(k / side_) - half_, static_cast<int>(k % side_) - half_};
    }
    [[nodiscard]] Point position(std::size_t k) const {
        const Index ix = index(k);
        return {ix[0] * h_, ix[1] * h_};
    }
    [[nodiscard]] std::size_t origin() const { return flat(0, 0); }

    [[nodiscard]] NodeKind kind(std::size_t k) const { return kind_[k]; }
    [[nodiscard]] NodeKind kind(int i, int j) const { return contains(i, j) ? kind_[flat(i, j)] : NodeKind::exterior; }
    [[nodiscard]] bool in_ball(std::size_t k) const { return kind_[k] != NodeKind::exterior; }
    [[nodiscard]] bool is_interior(std::size_t k) const { return kind_[k] == NodeKind::interior; }

    double& operator[](std::size_t k) { return values_[k]; }
    double operator[](std::size_t k) const { return values_[k]; }
    [[nodiscard]] double at(int i, int j) const { return values_[flat(i, j)]; }
    [[nodiscard]] const std::vector<double>& values() const { return values_; }
    [[nodiscard]] std::vector<double>& values() { return values_; }

    /// Nearest node to a base point, or size() when it lies off the grid box.
    [[nodiscard]] std::size_t nearest_node(const Point& p) const {
        const int i = static_cast<int>(std::lround(p[0] / h_));
        const int j = dim_ == 1 ? 0 : static_cast<int>(std::lround(p[1] / h_));
        if (!contains(i, j)) return size();
        return flat(i, j);
    }

    /// Node ids of in-ball nodes inside the closed ball B(center, r).
    [[nodiscard]] std::vector<std::size_t> nodes_in_ball(const Point& center, double r) const {
        std::vector<std::size_t> out;
        const double r2 = r * r * (1 + 1e-12) + 1e-24;
        for (std::size_t k = 0; k < size(); ++k) {
            if (!in_ball(k)) continue;
            const Point p = position(k);
            const double dx = p[0] - center[0];
            const double dy = p[1] - center[1];
            if (dx * dx + dy * dy <= r2) out.push_back(k);
        }
        return out;
    }

private:
    int dim_ = 2;
    double radius_ = 1.0;
    double h_ = 1.0;
    int half_ = 0;
    int side_ = 1;
    std::vector<double> values_;
    std::vector<NodeKind> kind_;
};

/// Thrown when a stencil is requested at a node that does not support it.
struct stencil_error : std::domain_error {
    using std::domain_error::domain_error;
};

inline void require_interior(const GridFunction& f, std::size_t k) {
    if (k >= f.size() || !f.is_interior(k)) throw stencil_error("stencil requested at a non-interior node");
}

/// Centered first differences at an interior node.
inline Point gradient(const GridFunction& f, std::size_t k) {
    require_interior(f, k);
    const auto [i, j] = f.index(k);
    const double h2 = 2 * f.h();
    Point g{(f.at(i + 1, j) - f.at(i - 1, j)) / h2, 0.0};
    if (f.base_dim() == 2) g[1] = (f.at(i, j + 1) - f.at(i, j - 1)) / h2;
    return g;
}

using Matrix2 = std::array<std::array<double, 2>, 2>;

/// Centered second differences; the mixed entry uses the four diagonal neighbours.
inline Matrix2 hessian(const GridFunction& f, std::size_t k) {
    require_interior(f, k);
    const auto [i, j] = f.index(k);
    const double hh = f.h() * f.h();
    const double c = f.at(i, j);
    Matrix2 H{};
    H[0][0] = (f.at(i + 1, j) - 2 * c + f.at(i - 1, j)) / hh;
    if (f.base_dim() == 2) {
        H[1][1] = (f.at(i, j + 1) - 2 * c + f.at(i, j - 1)) / hh;
        H[0][1] = H[1][0] =
            (f.at(i + 1, j + 1) - f.at(i + 1, j - 1) - f.at(i - 1, j + 1) + f.at(i - 1, j - 1)) / (4 * hh);
    }
    return H;
}

inline double laplacian_at(const GridFunction& f, std::size_t k) {
    const Matrix2 H = hessian(f, k);
    return H[0][0] + H[1][1];
}

/// Discrete Laplacian at interior nodes; NaN at every other node.
inline GridFunction laplacian(const GridFunction& f) {
    GridFunction out = f;
    for (std::size_t k = 0; k < f.size(); ++k)
        out[k] = f.is_interior(k) ? laplacian_at(f, k) : std::numeric_limits<double>::quiet_NaN();
    return out;
}

/// max - min over defined samples in the closed ball B(center, r).
inline double oscillation(const GridFunction& f, const Point& center, double r) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t k : f.nodes_in_ball(center, r)) {
        const double v = f[k];
        if (std::isnan(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo > hi) throw std::domain_error("oscillation: ball contains no defined samples");
    return hi - lo;
}

struct HolderMeasurement {
    double seminorm = 0.0;
    /// Discrete-vs-continuous gap estimate: seminorm * h^sigma.
    double quantization = 0.0;
    std::size_t argmax_a = 0;
    std::size_t argmax_b = 0;
};

namespace detail {

/// pow(node_distance(di, dj, h), sigma) for 0 <= di, dj <= extent.
class DistancePowTable {
public:
    DistancePowTable(int extent, double h, double sigma) : extent_(extent), table_((extent + 1) * (extent + 1)) {
        for (int a = 0; a <= extent; ++a)
            for (int b = 0; b <= extent; ++b) table_[a * (extent + 1) + b] = std::pow(node_distance(a, b, h), sigma);
    }
    [[nodiscard]] double operator()(int di, int dj) const {
        return table_[std::abs(di) * (extent_ + 1) + std::abs(dj)];
    }

private:
    int extent_;
    std::vector<double> table_;
};

}  // namespace detail

/// sup over distinct node pairs in B(center, r) of |f(x)-f(y)| / |x-y|^sigma.
inline HolderMeasurement holder_seminorm(const GridFunction& f, double sigma, const Point& center, double r) {
    if (!(sigma > 0) || sigma > 1) throw std::invalid_argument("holder exponent must lie in (0, 1]");
    std::vector<std::size_t> nodes;
    for (std::size_t k : f.nodes_in_ball(center, r))
        if (!std::isnan(f[k])) nodes.push_back(k);
    if (nodes.size() < 2) throw std::domain_error("holder_seminorm: fewer than two nodes");
    const detail::DistancePowTable dpow(f.side(), f.h(), sigma);
    std::vector<Index> idx(nodes.size());
    std::vector<double> val(nodes.size());
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        idx[a] = f.index(nodes[a]);
        val[a] = f[nodes[a]];
    }
    HolderMeasurement m;
    m.argmax_a = m.argmax_b = nodes.front();
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        for (std::size_t b = a + 1; b < nodes.size(); ++b) {
            const double q = std::abs(val[a] - val[b]) / dpow(idx[a][0] - idx[b][0], idx[a][1] - idx[b][1]);
            if (q > m.seminorm) {
                m.seminorm = q;
                m.argmax_a = nodes[a];
                m.argmax_b = nodes[b];
            }
        }
    }
    m.quantization = m.seminorm * std::pow(f.h(), sigma);
    return m;
}

inline HolderMeasurement holder_seminorm(const GridFunction& f, double sigma) {
    return holder_seminorm(f, sigma, {0.0, 0.0}, f.radius());
}

/// sup |f| over defined in-ball samples.
inline double sup_abs(const GridFunction& f) {
    double m = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k)
        if (f.in_ball(k) && !std::isnan(f[k])) m = std::max(m, std::abs(f[k]));
    return m;
}

/// Same-spacing field on the smaller ball B(0, radius); node kinds are recomputed.
inline GridFunction restrict_to_ball(const GridFunction& f, double radius) {
    if (radius > f.radius() * (1 + 1e-12)) throw std::invalid_argument("restriction radius exceeds the domain");
    GridFunction out(f.base_dim(), radius, f.h());
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (!out.in_ball(k)) continue;
        const auto [i, j] = out.index(k);
        out[k] = f.at(i, j);
    }
    return out;
}

/// Multilinear interpolation of f at a base point inside the grid box.
inline double interpolate(const GridFunction& f, const Point& p) {
    const double x = p[0] / f.h();
    const int i0 = static_cast<int>(std::floor(x));
    const double tx = x - i0;
    auto val = [&](int i, int j) {
        if (f.kind(i, j) == NodeKind::exterior) throw std::domain_error("interpolation stencil leaves the ball");
        return f.at(i, j);
    };
    if (f.base_dim() == 1) {
        if (tx == 0.0) return val(i0, 0);
        return (1 - tx) * val(i0, 0) + tx * val(i0 + 1, 0);
    }
    const double y = p[1] / f.h();
    const int j0 = static_cast<int>(std::floor(y));
    const double ty = y - j0;
    if (tx == 0.0 && ty == 0.0) return val(i0, j0);
    if (ty == 0.0) return (1 - tx) * val(i0, j0) + tx * val(i0 + 1, j0);
    if (tx == 0.0) return (1 - ty) * val(i0, j0) + ty * val(i0, j0 + 1);
    return (1 - tx) * (1 - ty) * val(i0, j0) + tx * (1 - ty) * val(i0 + 1, j0) + (1 - tx) * ty * val(i0, j0 + 1) +
           tx * ty * val(i0 + 1, j0 + 1);
}

/// Local refinement hook: f interpolated onto B(0, radius) with spacing h/factor.
inline GridFunction refine_local(const GridFunction& f, double radius, int factor) {
    if (factor < 1) throw std::invalid_argument("refinement factor must be >= 1");
    GridFunction out(f.base_dim(), radius, f.h() / factor);
    for (std::size_t k = 0; k < out.size(); ++k)
        if (out.in_ball(k)) out[k] = interpolate(f, out.position(k));
    return out;
}

// ---------------------------------------------------------------- gf1 format

inline void write_gf1(std::ostream& os, const GridFunction& f) {
    os << "gf1\n"
       << "basedim " << f.base_dim() << "\n"
       << "radius " << shortest(f.radius()) << "\n"
       << "h " << shortest(f.h()) << "\n";
    for (std::size_t k = 0; k < f.size(); ++k)
        os << (f.in_ball(k) ? shortest(f[k]) : std::string("nan")) << "\n";
}

inline std::string to_gf1(const GridFunction& f) {
    std::ostringstream ss;
    write_gf1(ss, f);
    return ss.str();
}

inline double parse_double(const std::string& tok) {
    if (tok == "nan" || tok == "NaN" || tok == "-nan") return std::numeric_limits<double>::quiet_NaN();
    if (tok == "inf") return std::numeric_limits<double>::infinity();
    if (tok == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const char* b = tok.data();
    const char* e = b + tok.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || ptr != e) throw std::runtime_error("gf1: bad number '" + tok + "'");
    return v;
}

inline GridFunction read_gf1(std::istream& is) {
    std::string line;
    auto next = [&]() {
        if (!std::getline(is, line)) throw std::runtime_error("gf1: unexpected end of input");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    if (next() != "gf1") throw std::runtime_error("gf1: missing magic line");
    auto keyed = [&](const char* key) {
        std::istringstream ls(next());
        std::string k, v;
        ls >> k >> v;
        if (k != key) throw std::runtime_error(std::string("gf1: expected '") + key + "'");
        return v;
    };
    const int dim = static_cast<int>(parse_double(keyed("basedim")));
    const double radius = parse_double(keyed("radius"));
    const double h = parse_double(keyed("h"));
    GridFunction f(dim, radius, h);
    for (std::size_t k = 0; k < f.size(); ++k) {
        const double v = parse_double(next());
        f[k] = f.in_ball(k) ? v : 0.0;
    }
    return f;
}

inline GridFunction from_gf1(const std::string& text) {
    std::istringstream ss(text);
    return read_gf1(ss);
}

}  // namespace grid
}  // namespace flatcert
