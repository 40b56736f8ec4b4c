#pragma once

#include "voltsmile/calibration.hpp"
#include "voltsmile/delivery.hpp"
#include "voltsmile/forward_model.hpp"
#include "voltsmile/fourier.hpp"
#include "voltsmile/market.hpp"
#include "voltsmile/mc.hpp"
#include "voltsmile/nig.hpp"
#include "voltsmile/optimize.hpp"
#include "voltsmile/report.hpp"
#include "voltsmile/rng.hpp"
