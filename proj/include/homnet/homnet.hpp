#pragma once

#include "homnet/design.hpp"
#include "homnet/error.hpp"
#include "homnet/features.hpp"
#include "homnet/inference.hpp"
#include "homnet/ingest.hpp"
#include "homnet/null_sampler.hpp"
#include "homnet/rng.hpp"
#include "homnet/study.hpp"
#include "homnet/synth.hpp"
#include "homnet/topics.hpp"
