#pragma once

#include <cstdint>
#include <random>

#include "semimix/model.hpp"

namespace semimix::detail {

// Independent stream for (seed, stream); used for starts and replications.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream);

// Hard k-means partition (k-means++ seeding, Lloyd iterations) on the
// standardised continuous columns and one-hot categorical columns.
Responsibilities kmeans_responsibilities(const Dataset& data, std::size_t k,
                                         std::mt19937_64& rng);

// Rows drawn from a flat Dirichlet.
Responsibilities random_responsibilities(std::size_t n, std::size_t k,
                                         std::mt19937_64& rng);

}  // namespace semimix::detail
