#pragma once

// Numerical tolerances shared by validation, the oracle and the analyses.
namespace hca::tol {

inline constexpr double kRowSum = 1e-12;        // policy / transition rows
inline constexpr double kDistribution = 1e-10;  // propagated k-step rows
inline constexpr double kReachable = 1e-15;     // p_k(s'|s) above this is reachable
inline constexpr double kBellman = 1e-10;       // certifies v_hat == V_pi
inline constexpr double kIdentity = 1e-10;      // slack for exact-mode identities
inline constexpr double kBayes = 1e-12;
inline constexpr double kSymmetry = 1e-12;
inline constexpr double kPolicyMatch = 1e-12;

}  // namespace hca::tol
