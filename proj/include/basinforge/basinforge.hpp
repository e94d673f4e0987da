#pragma once

#include "basinforge/common.hpp"
#include "basinforge/jet2.hpp"
#include "basinforge/autoseq.hpp"
#include "basinforge/basin.hpp"
#include "basinforge/normalform.hpp"
#include "basinforge/trains.hpp"
#include "basinforge/curves.hpp"
