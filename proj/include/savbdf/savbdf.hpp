#pragma once

#include "savbdf/errors.hpp"
#include "savbdf/bdf_tableau.hpp"
#include "savbdf/spectral.hpp"
#include "savbdf/history.hpp"
#include "savbdf/problems.hpp"
#include "savbdf/sav_stepper.hpp"
#include "savbdf/harness.hpp"
