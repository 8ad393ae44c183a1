#pragma once

namespace endotrack {

// Selects between the OpenMP kernel and its serial reference.
enum class Exec { Serial, Parallel };

}  // namespace endotrack
