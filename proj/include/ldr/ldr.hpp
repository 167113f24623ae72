#pragma once

#include "ldr/error.hpp"
#include "ldr/nuclear_basis.hpp"
#include "ldr/electronic_model.hpp"
#include "ldr/ldr_propagator.hpp"
#include "ldr/reference_splitop.hpp"
#include "ldr/io/config.hpp"
#include "ldr/io/csv.hpp"
#include "ldr/io/experiment.hpp"
