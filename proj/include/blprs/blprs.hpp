#pragma once

#include "blprs/checkpoint.hpp"
#include "blprs/dataset.hpp"
#include "blprs/kernels.hpp"
#include "blprs/layers.hpp"
#include "blprs/network.hpp"
#include "blprs/synth.hpp"
#include "blprs/tensor.hpp"
#include "blprs/trainer.hpp"
