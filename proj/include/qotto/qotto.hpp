// qotto.hpp: umbrella header for the physics library.
#pragma once

#include "apt.hpp"
#include "driven_system.hpp"
#include "errors.hpp"
#include "oracle_ode.hpp"
#include "otto.hpp"
#include "piston.hpp"
#include "quadrature.hpp"
