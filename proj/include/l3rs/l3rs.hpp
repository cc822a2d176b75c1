#pragma once

#include "l3rs/error.hpp"
#include "l3rs/tensor.hpp"
#include "l3rs/rng.hpp"
#include "l3rs/nn.hpp"
#include "l3rs/optdir.hpp"
#include "l3rs/features.hpp"
#include "l3rs/controller.hpp"
#include "l3rs/optimizer.hpp"
#include "l3rs/learned.hpp"
#include "l3rs/tasks.hpp"
#include "l3rs/parallel.hpp"
#include "l3rs/inner_loop.hpp"
#include "l3rs/nes.hpp"
#include "l3rs/meta.hpp"
#include "l3rs/bench.hpp"
#include "l3rs/io.hpp"
#include "l3rs/config.hpp"
