#pragma once

#include "sekron/conv.hpp"
#include "sekron/decompose.hpp"
#include "sekron/equivalences.hpp"
#include "sekron/error.hpp"
#include "sekron/io.hpp"
#include "sekron/linalg.hpp"
#include "sekron/planner.hpp"
#include "sekron/tensor.hpp"
