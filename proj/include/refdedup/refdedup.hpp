#pragma once

#include "refdedup/rng.hpp"
#include "refdedup/text.hpp"
#include "refdedup/vocabulary.hpp"
#include "refdedup/corpus.hpp"
#include "refdedup/similarity.hpp"
#include "refdedup/comparison.hpp"
#include "refdedup/clustering.hpp"
#include "refdedup/distribution.hpp"
#include "refdedup/evaluation.hpp"
#include "refdedup/pipeline.hpp"
#include "refdedup/manifest.hpp"
#include "refdedup/io.hpp"
