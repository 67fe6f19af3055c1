#pragma once

#include <cmath>
#include <string>

#include "billiard/sections.hpp"

namespace billiard {

enum class ObservableKind { Constant, Coordinate, HolderBump };

// Observable on the cross-section M (map domain) or on Q x S^1 (flow domain).
//
// HolderBump: f(p) = (1 - (d(p, center)/width)^eta)_+ where d is the natural
// distance of the domain. Since |a^eta - b^eta| <= |a-b|^eta for eta in (0,1],
// the eta-Holder seminorm is exactly width^{-eta}.
struct ObservableSpec {
    ObservableKind kind = ObservableKind::Constant;
    bool flow_domain = false;

    double value = 1.0;  // Constant

    // Coordinate: map domain 0 = r (global arc length), 1 = phi;
    // flow domain 0 = x, 1 = y, 2 = horizontal direction component.
    int axis = 0;

    // HolderBump: center is (global r, phi) on M or (x, y) on Q.
    double center_a = 0.0;
    double center_b = 0.0;
    double width = 0.1;
    double eta = 0.8;

    double holder_seminorm() const {
        if (kind != ObservableKind::HolderBump)
            throw ObservableUndefined("seminorm only defined for HolderBump");
        return std::pow(width, -eta);
    }

    std::string id() const {
        switch (kind) {
            case ObservableKind::Constant: return "const:" + std::to_string(value);
            case ObservableKind::Coordinate: return "coord:" + std::to_string(axis);
            case ObservableKind::HolderBump:
                return "bump:" + std::to_string(center_a) + "," + std::to_string(center_b) +
                       ":w=" + std::to_string(width) + ":eta=" + std::to_string(eta);
        }
        return "?";
    }
};

inline ObservableSpec make_constant(double v, bool flow_domain = false) {
    ObservableSpec o;
    o.kind = ObservableKind::Constant;
    o.flow_domain = flow_domain;
    o.value = v;
    return o;
}

inline ObservableSpec make_coordinate(int axis, bool flow_domain = false) {
    ObservableSpec o;
    o.kind = ObservableKind::Coordinate;
    o.flow_domain = flow_domain;
    o.axis = axis;
    return o;
}

inline ObservableSpec make_map_bump(double center_r, double center_phi, double width,
                                    double eta) {
    ObservableSpec o;
    o.kind = ObservableKind::HolderBump;
    o.flow_domain = false;
    o.center_a = center_r;
    o.center_b = center_phi;
    o.width = width;
    o.eta = eta;
    return o;
}

inline ObservableSpec make_flow_bump(double center_x, double center_y, double width,
                                     double eta) {
    ObservableSpec o = make_map_bump(center_x, center_y, width, eta);
    o.flow_domain = true;
    return o;
}

inline double eval_map(const Table& table, const ObservableSpec& o, const MCoord& m) {
    if (o.flow_domain) throw ObservableUndefined("flow observable in map estimator");
    switch (o.kind) {
        case ObservableKind::Constant: return o.value;
        case ObservableKind::Coordinate:
            return o.axis == 0 ? table.global_r(m.piece, m.r) : m.phi;
        case ObservableKind::HolderBump: {
            double dr = table.boundary_distance(table.global_r(m.piece, m.r), o.center_a);
            double d = std::hypot(dr, m.phi - o.center_b);
            double u = d / o.width;
            return u >= 1.0 ? 0.0 : 1.0 - std::pow(u, o.eta);
        }
    }
    return 0.0;
}

inline double eval_flow(const Table& /*table*/, const ObservableSpec& o, const FlowState& s) {
    if (!o.flow_domain) throw ObservableUndefined("map observable in flow estimator");
    switch (o.kind) {
        case ObservableKind::Constant: return o.value;
        case ObservableKind::Coordinate:
            if (o.axis == 0) return s.pos.x;
            if (o.axis == 1) return s.pos.y;
            return std::cos(s.theta);
        case ObservableKind::HolderBump: {
            double d = std::hypot(s.pos.x - o.center_a, s.pos.y - o.center_b);
            double u = d / o.width;
            return u >= 1.0 ? 0.0 : 1.0 - std::pow(u, o.eta);
        }
    }
    return 0.0;
}

}  // namespace billiard
