#pragma once

namespace artbp {

/// Selects the serial reference loop or the OpenMP kernel for the
/// data-parallel parts (Monte-Carlo replicas, finite-difference coordinates,
/// batch lanes, independent runs).
enum class Execution { Serial, Parallel };

}  // namespace artbp
