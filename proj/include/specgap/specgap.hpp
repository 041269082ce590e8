#ifndef SPECGAP_SPECGAP_HPP
#define SPECGAP_SPECGAP_HPP

// Umbrella header.

#include "specgap/core.hpp"
#include "specgap/kernel.hpp"
#include "specgap/io.hpp"
#include "specgap/assumptions.hpp"
#include "specgap/constants.hpp"
#include "specgap/search.hpp"
#include "specgap/propagator.hpp"
#include "specgap/eigensolver.hpp"
#include "specgap/models.hpp"
#include "specgap/serialize.hpp"

#endif  // SPECGAP_SPECGAP_HPP
