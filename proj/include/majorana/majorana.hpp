#pragma once

#include "control.hpp"
#include "dynamics.hpp"
#include "experiment.hpp"
#include "fock.hpp"
#include "schemes.hpp"
