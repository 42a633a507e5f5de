#pragma once

#include <filesystem>

#include "saddle/problems.hpp"

namespace saddle {

/// Binary dump of a synthetic instance.
///
/// Layout (native little-endian, checked on load):
///   8 bytes  magic "SDLPROB\0"
///   u32      format version (1)
///   u32      byte-order marker 0x01020304
///   u64      n, d, seed
///   f64      neg_eig, pos_lo, pos_hi, perturbation, offset_scale
///   f64      box_radius, max_component_norm, origin_hess_norm, L, M
///   u64      k = number of stored origin eigenvalues (0 or d), then k f64
///   f64      A_1..A_n, each d*d row-major
///   f64      b_1..b_n, each d
inline constexpr std::uint32_t kProblemFormatVersion = 1;

void save_problem(const SyntheticSaddleProblem& problem, const std::filesystem::path& path);
SyntheticSaddleProblem load_problem(const std::filesystem::path& path);

}  // namespace saddle
