#pragma once

#include "kmtpe/bench.hpp"
#include "kmtpe/builtin_shapes.hpp"
#include "kmtpe/cluster.hpp"
#include "kmtpe/config.hpp"
#include "kmtpe/driver.hpp"
#include "kmtpe/evaluate.hpp"
#include "kmtpe/hw.hpp"
#include "kmtpe/layer_shape.hpp"
#include "kmtpe/quantize.hpp"
#include "kmtpe/search.hpp"
#include "kmtpe/search_space.hpp"
#include "kmtpe/sensitivity.hpp"
#include "kmtpe/tasks.hpp"
#include "kmtpe/tiny_net.hpp"
#include "kmtpe/tpe.hpp"
#include "kmtpe/trial.hpp"
