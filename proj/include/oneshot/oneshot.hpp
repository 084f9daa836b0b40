#pragma once

// Umbrella header: one-shot auction learning with differentially private
// regret gradients, plus the misreport-enumeration evaluation harness.

#include "oneshot/accountant.hpp"
#include "oneshot/config_io.hpp"
#include "oneshot/csv.hpp"
#include "oneshot/dp.hpp"
#include "oneshot/errors.hpp"
#include "oneshot/evaluator.hpp"
#include "oneshot/net.hpp"
#include "oneshot/parallel.hpp"
#include "oneshot/rng.hpp"
#include "oneshot/svg.hpp"
#include "oneshot/trainer.hpp"
#include "oneshot/valuations.hpp"
