#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "billiard/common.hpp"

namespace billiard {

enum class Model { Symmetric, Folded };

enum class PieceKind { PowerBottom, CapRight, Axis, PowerTop, CapLeft };

inline const char* to_string(PieceKind k) {
    switch (k) {
        case PieceKind::PowerBottom: return "PowerBottom";
        case PieceKind::CapRight: return "CapRight";
        case PieceKind::Axis: return "Axis";
        case PieceKind::PowerTop: return "PowerTop";
        case PieceKind::CapLeft: return "CapLeft";
    }
    return "?";
}

// Immutable description of one table of the power-curve family
// y = +/-(|x|^beta + 1), |x| <= half_width, closed by two inward-bowed
// circular caps with centers on the x axis.
struct TableSpec {
    double beta = 4.0;
    double half_width = 1.0;   // x_c
    double epsilon = 0.3;      // window half-width
    Model model = Model::Symmetric;
    double cap_sagitta = 0.0;  // depth of the cap bow; 0 selects 0.2 * half_width
};

struct BoundaryPiece {
    PieceKind kind;
    double length = 0.0;
    // Power pieces and the axis: x at r = 0 and r = length (traversal direction).
    double x_begin = 0.0;
    double x_end = 0.0;
    // Caps: circle data; the arc is traversed with decreasing circle angle,
    // alpha(r) = alpha_begin - r / radius.
    Vec2 center{};
    double radius = 0.0;
    double alpha_begin = 0.0;
    double alpha_end = 0.0;
};

// Collision state on the cross-section M: boundary piece, arc length on the
// piece, and the angle phi from the inward normal to the outgoing direction
// (counterclockwise positive). Position is cached.
struct MCoord {
    int piece = 0;
    double r = 0.0;
    double phi = 0.0;
    Vec2 pos{};
};

// A phase point of the flow: position in Q plus unit direction stored as an angle.
struct FlowState {
    Vec2 pos{};
    double theta = 0.0;

    Vec2 dir() const { return {std::cos(theta), std::sin(theta)}; }
};

struct PointFrame {
    Vec2 pos{};
    Vec2 tangent{};
    Vec2 normal{};       // inward
    double curvature = 0.0;  // negative on dispersing pieces, 0 on flat/vertex
};

namespace detail {

// 16-point Gauss-Legendre nodes/weights on [-1, 1].
inline constexpr std::array<double, 8> kGlX = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274, 0.6178762444026438,
    0.7554044083550030, 0.8656312023878318, 0.9445750230732326, 0.9894009349916499};
inline constexpr std::array<double, 8> kGlW = {
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
    0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};

template <typename F>
double gauss16(const F& f, double a, double b) {
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double acc = 0.0;
    for (int i = 0; i < 8; ++i) {
        acc += kGlW[i] * (f(mid + half * kGlX[i]) + f(mid - half * kGlX[i]));
    }
    return acc * half;
}

}  // namespace detail

class Table {
  public:
    TableSpec spec;
    std::vector<BoundaryPiece> pieces;
    std::vector<double> piece_offset;  // global arc coordinate of each piece start
    double total_length = 0.0;
    double diameter = 0.0;

    double corner_y = 0.0;     // g(x_c)
    double cap_center_x = 0.0; // c > x_c
    double cap_radius = 0.0;
    double cap_sagitta = 0.0;  // h; cap apex sits at x_c - h
    double axis_half = 0.0;    // Folded: axis spans [-axis_half, axis_half]
    double power_length = 0.0; // arc length of one full power piece

    double g(double x) const { return std::pow(std::fabs(x), spec.beta) + 1.0; }
    double gp(double x) const {
        double b = spec.beta;
        return (x == 0.0) ? 0.0 : b * std::pow(std::fabs(x), b - 1.0) * (x > 0 ? 1.0 : -1.0);
    }
    double gpp(double x) const {
        double b = spec.beta;
        return (x == 0.0) ? 0.0 : b * (b - 1.0) * std::pow(std::fabs(x), b - 2.0);
    }
    double speed(double x) const {
        double d = gp(x);
        return std::sqrt(1.0 + d * d);
    }

    // Arc length along the power curve from x = -x_c to x.
    double power_arclen(double x) const {
        double xc = spec.half_width;
        x = std::clamp(x, -xc, xc);
        double t = (x + xc) / (2.0 * xc) * static_cast<double>(n_cells_);
        int cell = std::min(static_cast<int>(t), n_cells_ - 1);
        double x_node = -xc + cell * cell_dx_;
        auto f = [this](double u) { return speed(u); };
        return cum_[cell] + detail::gauss16(f, x_node, x);
    }

    // Inverse of power_arclen, Newton-refined to ~1e-14.
    double power_x_of_arclen(double s) const {
        double xc = spec.half_width;
        if (s <= 0.0) return -xc;
        if (s >= power_length) return xc;
        // initial guess from the cumulative table
        auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
        int cell = std::max(0, static_cast<int>(it - cum_.begin()) - 1);
        double x = -xc + cell * cell_dx_ +
                   cell_dx_ * (s - cum_[cell]) /
                       std::max(1e-300, cum_[std::min(cell + 1, n_cells_)] - cum_[cell]);
        for (int iter = 0; iter < 50; ++iter) {
            double fval = power_arclen(x) - s;
            double step = fval / speed(x);
            x -= step;
            x = std::clamp(x, -xc, xc);
            if (std::fabs(step) < 1e-15 * std::max(1.0, std::fabs(x))) break;
        }
        return x;
    }

    const BoundaryPiece& piece(int id) const {
        if (id < 0 || id >= static_cast<int>(pieces.size()))
            throw OutOfRange("piece id " + std::to_string(id));
        return pieces[static_cast<size_t>(id)];
    }

    int piece_index(PieceKind kind) const {
        for (size_t i = 0; i < pieces.size(); ++i)
            if (pieces[i].kind == kind) return static_cast<int>(i);
        throw OutOfRange(std::string("no piece of kind ") + to_string(kind));
    }

    bool has_piece(PieceKind kind) const {
        for (const auto& p : pieces)
            if (p.kind == kind) return true;
        return false;
    }

    double global_r(int piece_id, double r) const {
        return piece_offset[static_cast<size_t>(piece_id)] + r;
    }

    // Arc-length distance on the closed boundary.
    double boundary_distance(double ga, double gb) const {
        double d = std::fabs(ga - gb);
        return std::min(d, total_length - d);
    }

    // Strict set membership (no tolerance): used by the Liouville rejection sampler.
    bool contains(Vec2 p) const {
        double xc = spec.half_width;
        if (std::fabs(p.x) > xc) return false;
        if (p.y < -g(p.x)) return false;
        if (spec.model == Model::Symmetric) {
            if (p.y > g(p.x)) return false;
        } else {
            if (p.y > 0.0) return false;
        }
        double dx = p.x - cap_center_x;
        if (dx * dx + p.y * p.y < cap_radius * cap_radius) return false;
        dx = p.x + cap_center_x;
        if (dx * dx + p.y * p.y < cap_radius * cap_radius) return false;
        return true;
    }

    // Approximate signed distance to the boundary, positive inside. First-order
    // accurate near the boundary, which is where it is used.
    double signed_distance(Vec2 p) const {
        double xc = spec.half_width;
        double x = std::clamp(p.x, -xc, xc);
        double d = (p.y + g(x)) / speed(x);  // bottom curve
        if (spec.model == Model::Symmetric) {
            d = std::min(d, (g(x) - p.y) / speed(x));
        } else {
            d = std::min(d, -p.y);
        }
        double dr = std::hypot(p.x - cap_center_x, p.y) - cap_radius;
        double dl = std::hypot(p.x + cap_center_x, p.y) - cap_radius;
        return std::min({d, dr, dl});
    }

    // --- construction-time internals, public for build_table ---
    void init_arclen_table() {
        double xc = spec.half_width;
        n_cells_ = 2048;
        cell_dx_ = 2.0 * xc / n_cells_;
        cum_.assign(static_cast<size_t>(n_cells_) + 1, 0.0);
        auto f = [this](double u) { return speed(u); };
        for (int i = 0; i < n_cells_; ++i) {
            double a = -xc + i * cell_dx_;
            cum_[static_cast<size_t>(i) + 1] =
                cum_[static_cast<size_t>(i)] + detail::gauss16(f, a, a + cell_dx_);
        }
        power_length = cum_.back();
    }

  private:
    int n_cells_ = 0;
    double cell_dx_ = 0.0;
    std::vector<double> cum_;
};

// Position, tangent, inward normal, and signed curvature at arc length r on a piece.
inline PointFrame boundary_point(const Table& table, int piece_id, double r) {
    const BoundaryPiece& p = table.piece(piece_id);
    if (r < -1e-12 || r > p.length + 1e-12)
        throw OutOfRange("r=" + std::to_string(r) + " outside piece of length " +
                         std::to_string(p.length));
    r = std::clamp(r, 0.0, p.length);
    PointFrame out;
    switch (p.kind) {
        case PieceKind::PowerBottom: {
            double x = table.power_x_of_arclen(r);
            double sp = table.speed(x);
            out.pos = {x, -table.g(x)};
            out.tangent = {1.0 / sp, -table.gp(x) / sp};
            out.normal = {table.gp(x) / sp, 1.0 / sp};
            out.curvature = -table.gpp(x) / (sp * sp * sp);
            break;
        }
        case PieceKind::PowerTop: {
            double x = table.power_x_of_arclen(table.power_length - r);
            double sp = table.speed(x);
            out.pos = {x, table.g(x)};
            out.tangent = {-1.0 / sp, -table.gp(x) / sp};
            out.normal = {table.gp(x) / sp, -1.0 / sp};
            out.curvature = -table.gpp(x) / (sp * sp * sp);
            break;
        }
        case PieceKind::Axis: {
            out.pos = {p.x_begin - r, 0.0};
            out.tangent = {-1.0, 0.0};
            out.normal = {0.0, -1.0};
            out.curvature = 0.0;
            break;
        }
        case PieceKind::CapLeft:
        case PieceKind::CapRight: {
            double alpha = p.alpha_begin - r / p.radius;
            out.pos = {p.center.x + p.radius * std::cos(alpha),
                       p.center.y + p.radius * std::sin(alpha)};
            out.tangent = {std::sin(alpha), -std::cos(alpha)};
            out.normal = {std::cos(alpha), std::sin(alpha)};
            out.curvature = -1.0 / p.radius;
            break;
        }
    }
    return out;
}

inline MCoord make_mcoord(const Table& table, int piece_id, double r, double phi) {
    MCoord m;
    m.piece = piece_id;
    m.r = r;
    m.phi = phi;
    m.pos = boundary_point(table, piece_id, r).pos;
    return m;
}

// Post-collision outgoing state: direction = inward normal rotated by phi.
inline FlowState m_to_flow(const Table& table, const MCoord& m) {
    PointFrame f = boundary_point(table, m.piece, m.r);
    Vec2 d = rotate(f.normal, m.phi);
    return {f.pos, std::atan2(d.y, d.x)};
}

// Inverse of m_to_flow for boundary states.
inline MCoord flow_to_m(const Table& table, const FlowState& s) {
    const double tol = 1e-8;
    double xc = table.spec.half_width;
    Vec2 p = s.pos;
    for (int id = 0; id < static_cast<int>(table.pieces.size()); ++id) {
        const BoundaryPiece& bp = table.pieces[static_cast<size_t>(id)];
        double r = -1.0;
        switch (bp.kind) {
            case PieceKind::PowerBottom:
                if (std::fabs(p.x) <= xc + tol && std::fabs(p.y + table.g(p.x)) < tol)
                    r = table.power_arclen(p.x);
                break;
            case PieceKind::PowerTop:
                if (std::fabs(p.x) <= xc + tol && std::fabs(p.y - table.g(p.x)) < tol)
                    r = table.power_length - table.power_arclen(p.x);
                break;
            case PieceKind::Axis:
                if (std::fabs(p.y) < tol && p.x <= bp.x_begin + tol && p.x >= bp.x_end - tol)
                    r = bp.x_begin - p.x;
                break;
            case PieceKind::CapLeft:
            case PieceKind::CapRight: {
                Vec2 rel = p - bp.center;
                if (std::fabs(rel.norm() - bp.radius) < tol) {
                    double alpha = std::atan2(rel.y, rel.x);
                    // unwrap into (alpha_end, alpha_begin]
                    while (alpha > bp.alpha_begin + 1e-12) alpha -= 2.0 * kPi;
                    while (alpha < bp.alpha_begin - 2.0 * kPi) alpha += 2.0 * kPi;
                    if (alpha >= bp.alpha_end - 1e-9)
                        r = (bp.alpha_begin - alpha) * bp.radius;
                }
                break;
            }
        }
        if (r < -0.5 || r < -1e-12 || r > bp.length + 1e-9) continue;
        r = std::clamp(r, 0.0, bp.length);
        PointFrame f = boundary_point(table, id, r);
        if ((f.pos - p).norm() > 1e-7) continue;
        double phi = signed_angle(f.normal, s.dir());
        MCoord m{id, r, phi, f.pos};
        return m;
    }
    throw OutOfRange("flow state is not on the boundary");
}

// Angle between the outgoing trajectory and the vertical axis, folded into
// (-pi/2, pi/2]; positive when the trajectory leans toward +x.
inline double vertical_angle(const Table& table, const MCoord& m) {
    PieceKind k = table.piece(m.piece).kind;
    if (k == PieceKind::CapLeft || k == PieceKind::CapRight)
        throw UnsupportedPiece("vertical_angle on a cap");
    Vec2 d = m_to_flow(table, m).dir();
    if (d.y < 0.0) d = {-d.x, -d.y};
    return std::atan2(d.x, d.y);
}

namespace detail {

inline double refine_diameter(const Table& table, double ga, double gb);

}  // namespace detail

inline std::pair<int, double> locate_global_r(const Table& table, double gr) {
    gr = std::fmod(gr, table.total_length);
    if (gr < 0.0) gr += table.total_length;
    for (size_t i = table.pieces.size(); i-- > 0;) {
        if (gr >= table.piece_offset[i] - 1e-15) {
            return {static_cast<int>(i),
                    std::clamp(gr - table.piece_offset[i], 0.0, table.pieces[i].length)};
        }
    }
    return {0, gr};
}

inline Table build_table(const TableSpec& spec_in) {
    TableSpec spec = spec_in;
    if (!(spec.beta > 2.0))
        throw InvalidSpec("beta must be > 2, got " + std::to_string(spec.beta));
    if (!(spec.half_width > 0.0))
        throw InvalidSpec("half_width must be > 0");
    if (!(spec.epsilon > 0.0 && spec.epsilon < spec.half_width / 2.0))
        throw InvalidSpec("epsilon must lie in (0, half_width/2)");
    if (spec.cap_sagitta == 0.0) spec.cap_sagitta = 0.2 * spec.half_width;

    Table t;
    t.spec = spec;
    double xc = spec.half_width;
    t.corner_y = std::pow(xc, spec.beta) + 1.0;
    double yc = t.corner_y;
    double h = spec.cap_sagitta;
    if (!(h > 0.0 && h < yc && h < xc - spec.epsilon))
        throw InvalidSpec("cap_sagitta must lie in (0, min(g(x_c), x_c - epsilon))");
    t.cap_sagitta = h;
    double u = (yc * yc - h * h) / (2.0 * h);
    t.cap_center_x = xc + u;
    t.cap_radius = u + h;
    t.axis_half = xc - h;
    t.init_arclen_table();

    double theta_c = std::atan2(yc, t.cap_center_x - xc);  // corner angle on the cap circle
    // Corner must be a genuine corner, not a tangency.
    {
        double sp = t.speed(xc);
        Vec2 t_power{1.0 / sp, -t.gp(xc) / sp};
        double a0 = kPi + theta_c;
        Vec2 t_cap{std::sin(a0), -std::cos(a0)};
        if (std::fabs(signed_angle(t_power, t_cap)) < 1e-9)
            throw DegenerateCap("cap meets the power curve tangentially");
    }
    // The cap arc must stay strictly inside the strip between the power curves.
    for (int i = 1; i < 64; ++i) {
        double alpha = kPi + theta_c - (2.0 * theta_c) * i / 64.0;
        double ax = t.cap_center_x + t.cap_radius * std::cos(alpha);
        double ay = t.cap_radius * std::sin(alpha);
        if (std::fabs(ay) >= t.g(ax) - 1e-12 || ax <= 0.0)
            throw DegenerateCap("cap arc leaves the power-curve strip");
    }

    if (spec.model == Model::Symmetric) {
        BoundaryPiece bottom{PieceKind::PowerBottom, t.power_length, -xc, xc};
        BoundaryPiece top{PieceKind::PowerTop, t.power_length, xc, -xc};
        BoundaryPiece capR{PieceKind::CapRight, 2.0 * theta_c * t.cap_radius};
        capR.center = {t.cap_center_x, 0.0};
        capR.radius = t.cap_radius;
        capR.alpha_begin = kPi + theta_c;
        capR.alpha_end = kPi - theta_c;
        BoundaryPiece capL{PieceKind::CapLeft, 2.0 * theta_c * t.cap_radius};
        capL.center = {-t.cap_center_x, 0.0};
        capL.radius = t.cap_radius;
        capL.alpha_begin = theta_c;
        capL.alpha_end = -theta_c;
        t.pieces = {bottom, capR, top, capL};
    } else {
        BoundaryPiece bottom{PieceKind::PowerBottom, t.power_length, -xc, xc};
        BoundaryPiece capR{PieceKind::CapRight, theta_c * t.cap_radius};
        capR.center = {t.cap_center_x, 0.0};
        capR.radius = t.cap_radius;
        capR.alpha_begin = kPi + theta_c;
        capR.alpha_end = kPi;
        BoundaryPiece axis{PieceKind::Axis, 2.0 * t.axis_half, t.axis_half, -t.axis_half};
        BoundaryPiece capL{PieceKind::CapLeft, theta_c * t.cap_radius};
        capL.center = {-t.cap_center_x, 0.0};
        capL.radius = t.cap_radius;
        capL.alpha_begin = 0.0;
        capL.alpha_end = -theta_c;
        t.pieces = {bottom, capR, axis, capL};
    }

    t.piece_offset.clear();
    double off = 0.0;
    for (const auto& p : t.pieces) {
        t.piece_offset.push_back(off);
        off += p.length;
    }
    t.total_length = off;

    // Closure: each piece must end where the next begins.
    for (size_t i = 0; i < t.pieces.size(); ++i) {
        size_t j = (i + 1) % t.pieces.size();
        Vec2 end = boundary_point(t, static_cast<int>(i), t.pieces[i].length).pos;
        Vec2 begin = boundary_point(t, static_cast<int>(j), 0.0).pos;
        if ((end - begin).norm() > 1e-12)
            throw InvalidSpec("boundary does not close at piece " + std::to_string(i));
    }

    // Diameter by coarse pairwise scan plus local refinement.
    {
        const int K = 1024;
        double best = 0.0, best_a = 0.0, best_b = 0.0;
        std::vector<Vec2> pts(K);
        for (int i = 0; i < K; ++i) {
            auto [pid, r] = locate_global_r(t, t.total_length * i / K);
            pts[static_cast<size_t>(i)] = boundary_point(t, pid, r).pos;
        }
        for (int i = 0; i < K; ++i)
            for (int j = i + 1; j < K; ++j) {
                double d = (pts[static_cast<size_t>(i)] - pts[static_cast<size_t>(j)]).norm();
                if (d > best) {
                    best = d;
                    best_a = t.total_length * i / K;
                    best_b = t.total_length * j / K;
                }
            }
        t.diameter = detail::refine_diameter(t, best_a, best_b);
    }
    return t;
}

namespace detail {

inline double refine_diameter(const Table& table, double ga, double gb) {
    auto point = [&](double g) {
        auto [pid, r] = locate_global_r(table, g);
        return boundary_point(table, pid, r).pos;
    };
    double window = table.total_length / 1024.0;
    for (int round = 0; round < 60; ++round) {
        for (int side = 0; side < 2; ++side) {
            double& s = side == 0 ? ga : gb;
            Vec2 other = point(side == 0 ? gb : ga);
            double lo = s - window, hi = s + window;
            for (int it = 0; it < 40; ++it) {
                double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
                double d1 = (point(m1) - other).norm();
                double d2 = (point(m2) - other).norm();
                if (d1 < d2)
                    lo = m1;
                else
                    hi = m2;
            }
            s = 0.5 * (lo + hi);
        }
        window *= 0.5;
    }
    return (point(ga) - point(gb)).norm();
}

}  // namespace detail

}  // namespace billiard
