#pragma once

#include "dmfg/config.hpp"
#include "dmfg/coupling.hpp"
#include "dmfg/diffusion.hpp"
#include "dmfg/dynamics.hpp"
#include "dmfg/errors.hpp"
#include "dmfg/expression.hpp"
#include "dmfg/fpe.hpp"
#include "dmfg/grid.hpp"
#include "dmfg/hjb.hpp"
#include "dmfg/measures.hpp"
#include "dmfg/mfg.hpp"
#include "dmfg/operators.hpp"
#include "dmfg/paths.hpp"
#include "dmfg/pipeline.hpp"
#include "dmfg/sde.hpp"
#include "dmfg/verify.hpp"
