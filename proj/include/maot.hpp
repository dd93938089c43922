#pragma once

#include "maot/types.hpp"
#include "maot/mesh.hpp"
#include "maot/quadrature.hpp"
#include "maot/fe_space.hpp"
#include "maot/assembly.hpp"
#include "maot/recovery.hpp"
#include "maot/nvfem.hpp"
#include "maot/oblique.hpp"
#include "maot/problem.hpp"
#include "maot/monge_ampere.hpp"
#include "maot/bench.hpp"
#include "maot/image.hpp"
