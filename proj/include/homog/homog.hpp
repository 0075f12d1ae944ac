#ifndef HOMOG_HOMOG_HPP
#define HOMOG_HOMOG_HPP

#include "homog/types.hpp"
#include "homog/grid.hpp"
#include "homog/sparse.hpp"
#include "homog/coeff.hpp"
#include "homog/cell.hpp"
#include "homog/unfold.hpp"
#include "homog/solve.hpp"
#include "homog/metrics.hpp"
#include "homog/config.hpp"
#include "homog/study.hpp"
#include "homog/checks.hpp"

#endif  // HOMOG_HOMOG_HPP
