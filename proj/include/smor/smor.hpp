#pragma once

#include "smor/errors.hpp"
#include "smor/linalg.hpp"
#include "smor/weight.hpp"
#include "smor/symplectic.hpp"
#include "smor/weighted.hpp"
#include "smor/model.hpp"
#include "smor/integrators.hpp"
#include "smor/greedy.hpp"
#include "smor/rom.hpp"
#include "smor/package.hpp"
