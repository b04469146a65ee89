#pragma once

namespace falconn::testing {

// Levitating-magnet setpoint-tracking requirements in the textual grammar.
inline constexpr const char* kSpecNN =
    "G[1,37]((abs(Pos - Ref) > 0.005 + 0.03*abs(Ref)) -> "
    "F[0,2] G[0,1] !(0.005 + 0.03*abs(Ref) <= abs(Pos - Ref)))";

inline constexpr const char* kSpecNNBeta =
    "G[1,37]((abs(Pos - Ref) > 0.005 + 0.04*abs(Ref)) -> "
    "F[0,2] G[0,1] !(0.005 + 0.04*abs(Ref) <= abs(Pos - Ref)))";

inline constexpr const char* kSpecNNx =
    "F[0,1](Pos > 3.2) & F[1,1.5](G[0,0.5](1.75 < Pos < 2.25)) & "
    "G[2,3](1.825 < Pos < 2.175)";

}  // namespace falconn::testing
