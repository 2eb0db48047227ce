#pragma once

#include <phlab/ergodic_stats.hpp>
#include <phlab/foliation.hpp>
#include <phlab/leafspace.hpp>
#include <phlab/phase_maps.hpp>
#include <phlab/ustates.hpp>

#include <phlab/harness/plotdata.hpp>
#include <phlab/harness/reproduce.hpp>
#include <phlab/harness/run.hpp>
