#pragma once

#include <stdexcept>
#include <string>

namespace ssplab {

/// A policy that does not reach the goal with probability 1 from every
/// relevant state; planning linear systems have no finite solution.
struct ImproperPolicyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The MDP admits no proper policy at all (value iteration diverges).
struct NoProperPolicyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A projection / OMD solve failed to reach its tolerance within the
/// iteration cap.
struct SolverFailureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The floored occupancy polytope is empty (episode count too small for
/// the requested floor).
struct InfeasibleFloorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Lower-bound instance parameters violate the required inequalities.
struct ParameterViolationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An adversary callback returned costs outside [0, 1].
struct InvalidCostError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A visited state-action pair has zero occupancy under the executed
/// policy; impossible under correct execution, signals a bug.
struct DivisionHazardError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Malformed input file (MDP JSON, cost sequence, config).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ssplab
