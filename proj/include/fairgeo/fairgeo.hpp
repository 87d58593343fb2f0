// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fairgeo/config.hpp"
#include "fairgeo/driver.hpp"
#include "fairgeo/errors.hpp"
#include "fairgeo/geometry.hpp"
#include "fairgeo/oracle.hpp"
#include "fairgeo/prob.hpp"
#include "fairgeo/random_instances.hpp"
#include "fairgeo/report.hpp"
#include "fairgeo/solver.hpp"
