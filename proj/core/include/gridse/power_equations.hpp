#pragma once

#include <cmath>

#include "gridse/network.hpp"

namespace gridse {

// AC network equations in polar form. A branch end "a" seen from its own
// terminal has self admittance g_s + j b_s (ff or tt) and mutual admittance
// g + j b (ft or tf) towards the far end "b". With theta = theta_a - theta_b:
//
//   P_a =  V_a^2 g_s + V_a V_b (g cos(theta) + b sin(theta))
//   Q_a = -V_a^2 b_s + V_a V_b (g sin(theta) - b cos(theta))
//
// Power leaves bus a into the branch when P_a > 0. A bus injection is the
// sum of P_a/Q_a over incident branches plus the shunt terms G V^2, -B V^2.

struct EndAdmittance {
    Complex self;
    Complex mutual;
};

/// Admittances of `branch` seen from the terminal `at_bus`.
inline EndAdmittance end_admittance(const Branch& branch, const BranchAdmittance& y, int at_bus) {
    if (at_bus == branch.from_bus) return {y.ff, y.ft};
    return {y.tt, y.tf};
}

struct EndFlow {
    double p = 0.0;
    double q = 0.0;
};

inline EndFlow end_flow(const EndAdmittance& y, double va, double vb, double theta_ab) {
    const double gs = y.self.real();
    const double bs = y.self.imag();
    const double g = y.mutual.real();
    const double b = y.mutual.imag();
    const double c = std::cos(theta_ab);
    const double s = std::sin(theta_ab);
    return {va * va * gs + va * vb * (g * c + b * s), -va * va * bs + va * vb * (g * s - b * c)};
}

/// Partial derivatives of one end flow.
struct EndFlowDerivatives {
    double dp_dtheta_a = 0.0;  // d/dtheta_b is the negative
    double dq_dtheta_a = 0.0;
    double dp_dva = 0.0;
    double dp_dvb = 0.0;
    double dq_dva = 0.0;
    double dq_dvb = 0.0;
};

inline EndFlowDerivatives end_flow_derivatives(const EndAdmittance& y, double va, double vb,
                                               double theta_ab) {
    const double gs = y.self.real();
    const double bs = y.self.imag();
    const double g = y.mutual.real();
    const double b = y.mutual.imag();
    const double c = std::cos(theta_ab);
    const double s = std::sin(theta_ab);
    EndFlowDerivatives d;
    d.dp_dtheta_a = va * vb * (-g * s + b * c);
    d.dq_dtheta_a = va * vb * (g * c + b * s);
    d.dp_dva = 2.0 * va * gs + vb * (g * c + b * s);
    d.dp_dvb = va * (g * c + b * s);
    d.dq_dva = -2.0 * va * bs + vb * (g * s - b * c);
    d.dq_dvb = va * (g * s - b * c);
    return d;
}

}  // namespace gridse
