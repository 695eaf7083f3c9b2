#pragma once

#include "apanet/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace apanet {

// Central finite differences vs. the analytic VJPs, on random tie-free
// inputs. Relative error uses |a - f| / max(|a|, |f|, 1e-3) so that
// FD noise on zero gradients cannot dominate.
struct GradCheckEntry {
  std::string block;
  double max_rel_err;
};

inline constexpr double kGradCheckStep = 1e-5;

double gradcheck_pyramid(Rng& rng);
double gradcheck_single_attention(Rng& rng);
double gradcheck_cascaded_attention(Rng& rng);
// mode: "none", "single" or "cascaded".
double gradcheck_apanet(const std::string& mode, Rng& rng);
double gradcheck_triplet(Rng& rng);

// Runs every block seeds_per_block times and reports the max relative
// error seen per block.
std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed,
                                                int seeds_per_block = 20);

}  // namespace apanet
