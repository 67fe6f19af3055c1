#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <utility>

#include "billiard/geometry.hpp"

namespace billiard {

inline constexpr double kTMin = 1e-10;            // re-detection guard
inline constexpr double kCornerTol = 1e-9;        // arc-length distance to a junction
inline constexpr double kGrazingCos = 1e-8;       // |cos phi| below this is discarded
inline constexpr double kResidualTol = 1e-12;     // ray-curve equation at the root
inline constexpr int kMaxRefineIters = 200;

struct CollisionResult {
    MCoord m;          // incoming state: phi is the pre-reflection angle
    double tau = 0.0;  // flight time at unit speed
    bool grazing = false;
    PointFrame frame;  // boundary frame at the hit, for the reflection step
};

namespace detail {

struct RayHit {
    double t = 0.0;
    double x = 0.0;  // abscissa for curve/axis hits (unused for caps)
    double alpha = 0.0;  // circle angle for cap hits
};

// Safeguarded Newton/bisection for F on [a, b] with F(a) > 0 >= F(b).
template <typename F, typename DF>
double refine_root(const F& f, const DF& df, double a, double b) {
    double t = 0.5 * (a + b);
    for (int it = 0; it < kMaxRefineIters; ++it) {
        double ft = f(t);
        if (ft > 0.0)
            a = t;
        else
            b = t;
        double d = df(t);
        double tn = t - ft / d;
        if (!(tn > a && tn < b)) tn = 0.5 * (a + b);
        if (std::fabs(tn - t) < 1e-16 * std::max(1.0, std::fabs(t))) return tn;
        t = tn;
    }
    if (std::fabs(f(t)) < kResidualTol) return t;
    throw SolverStall("collision refinement did not converge");
}

// First root of a convex barrier function F (positive inside the domain) along
// the ray parameter, restricted to [ta, tb]. t_star, when finite, is the
// stationary point of F.
template <typename F, typename DF>
std::optional<double> first_convex_root(const F& f, const DF& df, double ta, double tb,
                                        double t_star) {
    if (!(tb > ta)) return std::nullopt;
    double knots[3];
    int nk = 0;
    knots[nk++] = ta;
    if (t_star > ta && t_star < tb) knots[nk++] = t_star;
    knots[nk++] = tb;
    double prev = 0.0;
    bool have_pos = false;
    for (int i = 0; i < nk; ++i) {
        double cur = knots[i];
        double fcur = f(cur);
        if (!have_pos) {
            if (fcur > 0.0) {
                have_pos = true;
                prev = cur;
            } else if (i == 0 && fcur > -1e-9 && df(cur) > 0.0) {
                // Start numerically on this curve with an outgoing ray: the
                // barrier rises from ~0, so treat it as positive here.
                have_pos = true;
                prev = cur;
            }
            continue;
        }
        if (fcur <= 0.0) return refine_root(f, df, prev, cur);
        prev = cur;
    }
    return std::nullopt;
}

}  // namespace detail

// First boundary intersection along the ray from s, at time > kTMin.
inline CollisionResult next_collision(const Table& table, const FlowState& s) {
    const Vec2 p = s.pos;
    const Vec2 d = s.dir();
    const double xc = table.spec.half_width;
    const double t_cap_max = 2.0 * table.diameter + 1.0;

    double best_t = std::numeric_limits<double>::infinity();
    int best_piece = -1;
    detail::RayHit best_hit;

    auto consider = [&](int piece_id, double t, double x, double alpha) {
        if (t > kTMin && t < best_t) {
            best_t = t;
            best_piece = piece_id;
            best_hit = {t, x, alpha};
        }
    };

    for (int id = 0; id < static_cast<int>(table.pieces.size()); ++id) {
        const BoundaryPiece& bp = table.pieces[static_cast<size_t>(id)];
        switch (bp.kind) {
            case PieceKind::PowerBottom:
            case PieceKind::PowerTop: {
                double sgn = bp.kind == PieceKind::PowerBottom ? 1.0 : -1.0;
                // Barrier: positive strictly inside the domain, convex in t.
                auto f = [&](double t) {
                    double x = p.x + t * d.x;
                    return sgn * (p.y + t * d.y) + table.g(x);
                };
                auto df = [&](double t) {
                    double x = p.x + t * d.x;
                    return sgn * d.y + table.gp(x) * d.x;
                };
                if (d.x == 0.0) {
                    if (std::fabs(p.x) > xc) break;
                    double y_target = -sgn * table.g(p.x);
                    if (d.y != 0.0) consider(id, (y_target - p.y) / d.y, p.x, 0.0);
                    break;
                }
                double ta = (-xc - p.x) / d.x, tb = (xc - p.x) / d.x;
                if (ta > tb) std::swap(ta, tb);
                ta = std::max(ta, kTMin);
                tb = std::min(tb, t_cap_max);
                // Stationary point of the barrier: g'(x*) = -sgn * d.y / d.x.
                double t_star = std::numeric_limits<double>::infinity();
                double slope = -sgn * d.y / d.x;
                double beta = table.spec.beta;
                if (std::fabs(slope) < table.gp(xc)) {
                    double xs = std::copysign(
                        std::pow(std::fabs(slope) / beta, 1.0 / (beta - 1.0)), slope);
                    t_star = (xs - p.x) / d.x;
                }
                if (auto t = detail::first_convex_root(f, df, ta, tb, t_star))
                    consider(id, *t, p.x + *t * d.x, 0.0);
                break;
            }
            case PieceKind::Axis: {
                if (d.y == 0.0) break;
                double t = -p.y / d.y;
                double x = p.x + t * d.x;
                if (x <= bp.x_begin && x >= bp.x_end) consider(id, t, x, 0.0);
                break;
            }
            case PieceKind::CapLeft:
            case PieceKind::CapRight: {
                Vec2 rel = p - bp.center;
                double bq = rel.dot(d);
                double cq = rel.dot(rel) - bp.radius * bp.radius;
                double disc = bq * bq - cq;
                if (disc <= 0.0) break;
                double sq = std::sqrt(disc);
                for (double t : {-bq - sq, -bq + sq}) {
                    if (t <= kTMin || t >= best_t) continue;
                    Vec2 hit = p + d * t;
                    double alpha = std::atan2(hit.y - bp.center.y, hit.x - bp.center.x);
                    while (alpha > bp.alpha_begin + 1e-12) alpha -= 2.0 * kPi;
                    while (alpha < bp.alpha_begin - 2.0 * kPi) alpha += 2.0 * kPi;
                    if (alpha >= bp.alpha_end - 1e-12) consider(id, t, 0.0, alpha);
                }
                break;
            }
        }
    }

    if (best_piece < 0)
        throw NoCollision("ray escapes the table: geometry corrupted");

    const BoundaryPiece& bp = table.pieces[static_cast<size_t>(best_piece)];
    double r;
    switch (bp.kind) {
        case PieceKind::PowerBottom: r = table.power_arclen(best_hit.x); break;
        case PieceKind::PowerTop: r = table.power_length - table.power_arclen(best_hit.x); break;
        case PieceKind::Axis: r = bp.x_begin - best_hit.x; break;
        default: r = (bp.alpha_begin - best_hit.alpha) * bp.radius; break;
    }
    if (r < kCornerTol || r > bp.length - kCornerTol)
        throw CornerHit("collision within corner tolerance of a piece junction");

    CollisionResult c;
    c.frame = boundary_point(table, best_piece, r);
    c.m.piece = best_piece;
    c.m.r = r;
    c.m.pos = c.frame.pos;
    c.m.phi = signed_angle(c.frame.normal, Vec2{-d.x, -d.y});
    c.tau = best_t;
    c.grazing = std::fabs(std::cos(c.m.phi)) < kGrazingCos;
    return c;
}

// Specular reflection: outgoing angle is the negated incoming angle.
inline MCoord reflect(const Table& table, const CollisionResult& c) {
    (void)table;
    if (c.grazing) throw GrazingDiscard("grazing collision");
    MCoord out = c.m;
    out.phi = -c.m.phi;
    return out;
}

// One step of the billiard map T plus its flight time.
inline std::pair<MCoord, double> billiard_map(const Table& table, const MCoord& m) {
    CollisionResult c = next_collision(table, m_to_flow(table, m));
    return {reflect(table, c), c.tau};
}

// Unit-speed flow for time t with specular reflections.
inline FlowState flow_advance(const Table& table, FlowState s, double t) {
    if (t < 0.0) throw OutOfRange("flow_advance needs t >= 0");
    double remaining = t;
    while (remaining > 0.0) {
        CollisionResult c = next_collision(table, s);
        if (c.tau >= remaining) {
            Vec2 d = s.dir();
            return {s.pos + d * remaining, s.theta};
        }
        remaining -= c.tau;
        MCoord out = reflect(table, c);
        Vec2 nd = rotate(c.frame.normal, out.phi);
        s = {c.frame.pos, std::atan2(nd.y, nd.x)};
    }
    return s;
}

// Window flight-time formula: both chord halves over the cosine of the
// vertical angle of the flight.
inline double free_flight_formula(double beta, double x, double phi_vertical, double x_next) {
    double c = std::cos(phi_vertical);
    if (c < 1e-12) throw AngleTooFlat("cos(phi) below 1e-12");
    double gx = std::pow(std::fabs(x), beta) + 1.0;
    double gxn = std::pow(std::fabs(x_next), beta) + 1.0;
    return gx / c + gxn / c;
}

// Billiard involution: same boundary point, reversed angle.
inline MCoord time_reverse(const MCoord& m) {
    MCoord out = m;
    out.phi = -m.phi;
    return out;
}

}  // namespace billiard
