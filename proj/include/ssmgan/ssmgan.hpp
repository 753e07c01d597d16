#pragma once

#include "ssmgan/error.hpp"
#include "ssmgan/rng.hpp"
#include "ssmgan/serialize.hpp"
#include "ssmgan/record.hpp"
#include "ssmgan/preprocess.hpp"
#include "ssmgan/dtw.hpp"
#include "ssmgan/kmeans.hpp"
#include "ssmgan/shape_model.hpp"
#include "ssmgan/autodiff.hpp"
#include "ssmgan/layers.hpp"
#include "ssmgan/networks.hpp"
#include "ssmgan/optim.hpp"
#include "ssmgan/gan.hpp"
#include "ssmgan/metrics.hpp"
#include "ssmgan/classifier.hpp"
#include "ssmgan/experiment.hpp"
#include "ssmgan/plot.hpp"
#include "ssmgan/fixture.hpp"
#include "ssmgan/runtime.hpp"
