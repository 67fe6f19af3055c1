#pragma once

#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "billiard/dynamics.hpp"
#include "billiard/geometry.hpp"

namespace billiard {

inline constexpr long long kDefaultExcursionCap = 1'000'000;

// One collision on the power curve(s) inside the window, in travel order.
struct Bounce {
    double x = 0.0;
    double phi_vertical = 0.0;  // vertical-angle convention of the outgoing leg
    double phi = 0.0;           // collision angle from the inward normal
};

struct Excursion {
    MCoord entry{};
    MCoord exit{};
    std::vector<Bounce> bounces;  // power-curve window collisions only
    int n = 0;                    // signed cell index, 0 when the window is never entered
    int n_prime = 0;              // 0 = absent/undefined
    int n_dprime = 0;
    double theta = 0.0;           // roof value: flow time entry -> exit
    long long bounce_count = 0;   // R: collisions after entry up to and including exit
    double entry_dx = 0.0;        // horizontal direction entering the window
    double exit_dx = 0.0;         // horizontal direction of the leg arriving at the exit
};

// Sigma membership: caps and the power curves away from the window. Axis points
// are interior crossings of the unfolded table and never belong to Sigma.
inline bool in_sigma(const Table& table, const MCoord& m, double epsilon) {
    switch (table.piece(m.piece).kind) {
        case PieceKind::CapLeft:
        case PieceKind::CapRight: return true;
        case PieceKind::Axis: return false;
        default: return std::fabs(m.pos.x) >= epsilon;
    }
}

inline bool in_sigma(const Table& table, const MCoord& m) {
    return in_sigma(table, m, table.spec.epsilon);
}

inline bool is_power_piece(const Table& table, const MCoord& m) {
    PieceKind k = table.piece(m.piece).kind;
    return k == PieceKind::PowerBottom || k == PieceKind::PowerTop;
}

// Bounce abscissas normalized so that travel starts from the positive side,
// matching the coordinate orientation of the split-index definitions.
inline std::vector<double> normalized_abscissas(const Excursion& e) {
    std::vector<double> xs;
    xs.reserve(e.bounces.size());
    double flip = e.entry_dx > 0.0 ? -1.0 : 1.0;
    for (const Bounce& b : e.bounces) xs.push_back(flip * b.x);
    return xs;
}

// n' (axis crossing / turning index) and n'' (where the per-bounce advance
// first halves relative to w_{n'}).
inline std::pair<int, int> split_indices(const Excursion& e) {
    if (e.bounces.empty()) throw NotAWindowExcursion("excursion has no window bounces");
    std::vector<double> xs = normalized_abscissas(e);
    const int k = static_cast<int>(xs.size());
    if (k == 1) return {1, 1};

    auto advance = [&](int m) { return xs[static_cast<size_t>(m) - 1] - xs[static_cast<size_t>(m)]; };

    int n_prime;
    double w_np;
    if (e.n > 0) {
        int first_neg = -1;
        for (int i = 0; i < k; ++i)
            if (xs[static_cast<size_t>(i)] < 0.0) {
                first_neg = i;
                break;
            }
        if (first_neg <= 0) throw SplitUndefined("no sign change among bounce abscissas");
        n_prime = first_neg;  // 1-based index of the last nonnegative abscissa
        w_np = advance(n_prime);
    } else {
        int arg_min = 0;
        for (int i = 1; i < k; ++i)
            if (xs[static_cast<size_t>(i)] < xs[static_cast<size_t>(arg_min)]) arg_min = i;
        n_prime = arg_min + 1;
        if (n_prime < 2) return {1, 1};
        w_np = advance(n_prime - 1);  // last decreasing advance before the turn
    }
    if (!(w_np > 0.0)) throw SplitUndefined("nonpositive advance at the split index");

    int scan_end = e.n > 0 ? n_prime : n_prime - 1;
    int n_dprime = 0;
    for (int m = 1; m <= scan_end; ++m) {
        double w_prev = m >= 2 ? advance(m - 1) : std::numeric_limits<double>::infinity();
        if (w_prev > 2.0 * w_np && 2.0 * w_np > advance(m)) {
            n_dprime = m;
            break;
        }
    }
    if (n_dprime == 0) {
        // No index satisfies the strict double inequality: take the first advance
        // at or below the doubled threshold.
        for (int m = 1; m <= scan_end; ++m)
            if (advance(m) <= 2.0 * w_np) {
                n_dprime = m;
                break;
            }
    }
    if (n_dprime == 0) n_dprime = scan_end;
    return {n_prime, n_dprime};
}

// Iterates the billiard map from a Sigma state until the first return to Sigma.
inline Excursion next_excursion(const Table& table, const MCoord& m,
                                long long cap = kDefaultExcursionCap) {
    double eps = table.spec.epsilon;
    if (!in_sigma(table, m, eps)) throw OutOfRange("next_excursion entry is not in Sigma");
    Excursion e;
    e.entry = m;
    FlowState s = m_to_flow(table, m);
    long long steps = 0;
    bool saw_window = false;
    while (true) {
        double leg_dx = s.dir().x;
        CollisionResult c = next_collision(table, s);
        e.theta += c.tau;
        ++steps;
        MCoord out = reflect(table, c);
        if (in_sigma(table, out, eps)) {
            e.exit = out;
            e.exit_dx = leg_dx;
            e.bounce_count = steps;
            break;
        }
        if (steps > cap) throw ExcursionTooLong("window excursion exceeded bounce cap");
        if (is_power_piece(table, out)) {
            if (!saw_window) {
                saw_window = true;
                e.entry_dx = leg_dx;
            }
            e.bounces.push_back({out.pos.x, vertical_angle(table, out), out.phi});
        }
        Vec2 nd = rotate(c.frame.normal, out.phi);
        s = {c.frame.pos, std::atan2(nd.y, nd.x)};
    }
    if (!e.bounces.empty()) {
        int count = static_cast<int>(e.bounces.size());
        bool pass_through = e.entry_dx * e.exit_dx > 0.0;
        e.n = pass_through ? count : -count;
        try {
            auto [np, ndp] = split_indices(e);
            e.n_prime = np;
            e.n_dprime = ndp;
        } catch (const SplitUndefined&) {
            // rare boundary configuration; left absent and excluded from
            // asymptotics downstream
        }
    }
    return e;
}

// Signed cell index: +n for pass-through, -n for same-side return; n counts
// power-curve bounces only (axis reflections of the folded model excluded).
inline int classify_cell(const Excursion& e) {
    if (e.bounces.empty()) throw NotAWindowExcursion("no window bounces to classify");
    return e.n;
}

// Natural distance on M: boundary arc length (unwrapped around the closed
// curve) and angle, Euclidean.
inline double m_distance(const Table& table, const MCoord& a, const MCoord& b) {
    double dr = table.boundary_distance(table.global_r(a.piece, a.r), table.global_r(b.piece, b.r));
    double dphi = a.phi - b.phi;
    return std::hypot(dr, dphi);
}

namespace detail {

inline MCoord offset_state(const Table& table, const MCoord& m, double alpha, double sep) {
    const BoundaryPiece& p = table.piece(m.piece);
    double r = m.r + sep * std::cos(alpha);
    double phi = m.phi + sep * std::sin(alpha);
    if (r < 0.0 || r > p.length || std::fabs(phi) > kPi / 2.0)
        throw OutOfRange("pair offset leaves the chart");
    return make_mcoord(table, m.piece, r, phi);
}

}  // namespace detail

using MapStep = std::function<MCoord(const MCoord&)>;

struct PairSearchResult {
    MCoord partner{};
    double start_distance = 0.0;
    double end_distance = 0.0;
    double avg_factor = 0.0;  // per-step contraction factor over K steps
};

// Finds a partner q at distance ~sep from m whose forward orbit under `step`
// converges toward the orbit of m: minimizes the separation after K steps over
// the transversal direction angle. The contracting direction's basin is
// ~1/Lambda wide (Lambda = the K-step expansion), far below any affordable
// grid at large K, so the search continues in the horizon: optimize exactly
// for a short horizon, then track the minimizer while the horizon doubles --
// finite-horizon contracting directions converge fast enough that each
// stage's optimum sits inside the next stage's basin.
inline PairSearchResult find_contracting_pair(const Table& table, const MCoord& m, double sep,
                                              int K, const MapStep& step,
                                              double min_avg_factor) {
    if (sep < 1e-9 || sep > 1e-4) throw OutOfRange("separation outside [1e-9, 1e-4]");
    auto objective = [&](double alpha, int horizon) -> double {
        try {
            MCoord a = m, b = detail::offset_state(table, m, alpha, sep);
            for (int k = 0; k < horizon; ++k) {
                a = step(a);
                b = step(b);
            }
            return m_distance(table, a, b);
        } catch (const BilliardError&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    auto refine = [&](double center, double span, int horizon) -> double {
        const int local = 48;
        double best_alpha = center, best_val = std::numeric_limits<double>::infinity();
        for (int i = -local; i <= local; ++i) {
            double alpha = center + span * i / local;
            double v = objective(alpha, horizon);
            if (v < best_val) {
                best_val = v;
                best_alpha = alpha;
            }
        }
        if (!std::isfinite(best_val)) throw NoContractionFound("no admissible pair direction");
        double lo = best_alpha - span / local, hi = best_alpha + span / local;
        for (int it = 0; it < 70; ++it) {
            double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
            if (objective(m1, horizon) < objective(m2, horizon))
                hi = m2;
            else
                lo = m1;
        }
        return 0.5 * (lo + hi);
    };

    double best_alpha = refine(kPi / 2.0, kPi / 2.0, std::min(K, 4));
    for (int horizon = 8; horizon < K; horizon *= 2)
        best_alpha = refine(best_alpha, 0.02, horizon);
    if (K > 4) best_alpha = refine(best_alpha, 0.02, K);
    double best_val = objective(best_alpha, K);
    if (!std::isfinite(best_val)) throw NoContractionFound("no admissible pair direction");

    PairSearchResult res;
    res.partner = detail::offset_state(table, m, best_alpha, sep);
    res.start_distance = m_distance(table, m, res.partner);
    res.end_distance = best_val;
    res.avg_factor = std::pow(res.start_distance / std::max(best_val, 1e-300),
                              1.0 / static_cast<double>(K));
    if (!(res.avg_factor >= min_avg_factor))
        throw NoContractionFound("per-step contraction below the requested factor");
    return res;
}

inline MCoord forward_step(const Table& table, const MCoord& m) {
    return billiard_map(table, m).first;
}

// One step of T^{-1} = rho o T o rho; its stable pairs are unstable pairs of T.
inline MCoord backward_step(const Table& table, const MCoord& m) {
    return time_reverse(billiard_map(table, time_reverse(m)).first);
}

// Stable-manifold surrogate partner, certified to lie in the same cell.
inline MCoord approximate_stable_pair(const Table& table, const MCoord& m, double separation,
                                      int K = 20, double min_avg_factor = 2.0,
                                      bool check_cell = true) {
    PairSearchResult res = find_contracting_pair(
        table, m, separation, K, [&](const MCoord& x) { return forward_step(table, x); },
        min_avg_factor);
    if (check_cell) {
        Excursion ep = next_excursion(table, m);
        Excursion eq = next_excursion(table, res.partner);
        if (ep.n != eq.n) throw CellMismatch("pair members fall in different cells");
    }
    return res.partner;
}

inline MCoord approximate_unstable_pair(const Table& table, const MCoord& m, double separation,
                                        int K = 20, double min_avg_factor = 2.0,
                                        bool check_cell = true) {
    PairSearchResult res = find_contracting_pair(
        table, m, separation, K, [&](const MCoord& x) { return backward_step(table, x); },
        min_avg_factor);
    if (check_cell) {
        Excursion ep = next_excursion(table, m);
        Excursion eq = next_excursion(table, res.partner);
        if (ep.n != eq.n) throw CellMismatch("pair members fall in different cells");
    }
    return res.partner;
}

// --- targeted seeding of window excursions -------------------------------

// Post-collision state on the bottom power curve at abscissa x0 > 0 aimed into
// the window, with the given vertical angle (leaning toward -x).
inline MCoord window_aimed_state(const Table& table, double x0, double theta_vertical) {
    int pid = table.piece_index(PieceKind::PowerBottom);
    double r = table.power_arclen(x0);
    PointFrame f = boundary_point(table, pid, r);
    Vec2 d{-std::sin(theta_vertical), std::cos(theta_vertical)};
    double phi = signed_angle(f.normal, d);
    return {pid, r, phi, f.pos};
}

// Signed cell index of the excursion launched from (x0, theta). Throws on
// discarded trajectories.
inline int cell_of_aim(const Table& table, double x0, double theta,
                       long long cap = kDefaultExcursionCap) {
    return next_excursion(table, window_aimed_state(table, x0, theta), cap).n;
}

// cell_of_aim with jitter retries for discards; nullopt when the excursion
// overruns the bounce cap, i.e. the aim is critical to working precision.
inline std::optional<int> try_cell_of_aim(const Table& table, double x0, double theta,
                                          long long cap = kDefaultExcursionCap) {
    for (int j = 0; j < 8; ++j) {
        try {
            return cell_of_aim(table, x0, theta, cap);
        } catch (const ExcursionTooLong&) {
            return std::nullopt;
        } catch (const BilliardError&) {
            theta += 1e-13 * (j + 1);
        }
    }
    return std::nullopt;
}

// Aim angles bracketing the turn-back / pass-through transition at entry
// abscissa x0. Outside [neg_far, pos_far] the chord skips the window entirely.
struct AimBracket {
    double neg_far = 0.0;   // smallest aim with a turn-back outcome
    double neg_near = 0.0;  // largest aim with a turn-back outcome
    double pos_near = 0.0;  // smallest aim with a pass-through outcome
    double pos_far = 0.0;   // largest aim with a pass-through outcome
};

inline AimBracket aim_bracket(const Table& table, double x0,
                              long long cap = kDefaultExcursionCap) {
    const int grid = 512;
    const double lo = 5e-3, hi = 0.75;
    AimBracket b;
    bool any_neg = false, any_pos = false;
    for (int i = 0; i <= grid; ++i) {
        double th = lo + (hi - lo) * i / grid;
        std::optional<int> n = try_cell_of_aim(table, x0, th, cap);
        if (!n || *n == 0) continue;
        if (*n < 0) {
            if (!any_neg) b.neg_far = th;
            b.neg_near = th;
            any_neg = true;
        } else {
            if (!any_pos) b.pos_near = th;
            b.pos_far = th;
            any_pos = true;
        }
    }
    if (!any_neg || !any_pos || !(b.neg_near < b.pos_near))
        throw CellUnreachable("no turn-back/pass-through transition in the aim range");
    return b;
}

// The critical aim angle separating turn-back from pass-through excursions at
// entry abscissa x0 (located by bisection on the outcome sign).
inline double critical_aim_angle(const Table& table, double x0, const AimBracket& br,
                                 long long cap = kDefaultExcursionCap) {
    double lo = br.neg_near, hi = br.pos_near;
    for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (lo + hi);
        std::optional<int> n = try_cell_of_aim(table, x0, mid, cap);
        if (!n) return mid;  // bounce cap reached: critical within the bracket
        if (*n > 0)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

inline double critical_aim_angle(const Table& table, double x0,
                                 long long cap = kDefaultExcursionCap) {
    return critical_aim_angle(table, x0, aim_bracket(table, x0, cap), cap);
}

// Entry state whose excursion lands exactly in cell n_target (either sign),
// found by bisection in the aim angle toward the critical angle; |n| grows
// monotonically (stepwise) as the aim approaches the transition.
inline MCoord find_cell_entry(const Table& table, int n_target, double x0,
                              long long cap = kDefaultExcursionCap) {
    if (n_target == 0) throw OutOfRange("cell index 0 has no window excursion");
    AimBracket br = aim_bracket(table, x0, cap);
    double a = n_target > 0 ? br.pos_far : br.neg_far;    // shallow cells
    double b = critical_aim_angle(table, x0, br, cap);    // deep cells accumulate here
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (a + b);
        std::optional<int> n = try_cell_of_aim(table, x0, mid, cap);
        bool overshoot =
            !n || std::llabs(static_cast<long long>(*n)) >
                      std::llabs(static_cast<long long>(n_target)) ||
            (n_target > 0) != (*n > 0);
        if (!overshoot && *n == n_target) return window_aimed_state(table, x0, mid);
        if (overshoot)
            b = mid;  // too close to the transition (or crossed it): back off
        else
            a = mid;
    }
    throw CellUnreachable("bisection did not land in the requested cell");
}

}  // namespace billiard
