#pragma once

#include "inrct/baselines.hpp"
#include "inrct/bayes.hpp"
#include "inrct/classical.hpp"
#include "inrct/core.hpp"
#include "inrct/data_sim.hpp"
#include "inrct/image_io.hpp"
#include "inrct/metrics.hpp"
#include "inrct/nn/adam.hpp"
#include "inrct/nn/fourier.hpp"
#include "inrct/nn/siren.hpp"
#include "inrct/nn/weights_io.hpp"
#include "inrct/projector.hpp"
#include "inrct/recon_single.hpp"
