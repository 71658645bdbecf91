#pragma once

#include "bosonic_mip/error.hpp"
#include "bosonic_mip/fock.hpp"
#include "bosonic_mip/linalg.hpp"
#include "bosonic_mip/state.hpp"
#include "bosonic_mip/projector.hpp"
#include "bosonic_mip/evolution.hpp"
#include "bosonic_mip/mip.hpp"
#include "bosonic_mip/bench.hpp"
#include "bosonic_mip/measurement.hpp"
#include "bosonic_mip/model_io.hpp"
#include "bosonic_mip/experiment.hpp"
