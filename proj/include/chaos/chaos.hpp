#pragma once

#include "chaos/error.hpp"
#include "chaos/linalg.hpp"
#include "chaos/models.hpp"
#include "chaos/objective.hpp"
#include "chaos/response.hpp"
#include "chaos/rng.hpp"
#include "chaos/schur.hpp"
#include "chaos/srb.hpp"
#include "chaos/stepping.hpp"
#include "chaos/tangent.hpp"
