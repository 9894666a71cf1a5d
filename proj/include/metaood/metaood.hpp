#pragma once

#include "metaood/baselines.hpp"
#include "metaood/config.hpp"
#include "metaood/csv.hpp"
#include "metaood/embeddings.hpp"
#include "metaood/error.hpp"
#include "metaood/evaluation.hpp"
#include "metaood/feature_block.hpp"
#include "metaood/gbrt.hpp"
#include "metaood/image_features.hpp"
#include "metaood/image_io.hpp"
#include "metaood/linalg.hpp"
#include "metaood/meta_features.hpp"
#include "metaood/meta_predictor.hpp"
#include "metaood/mlp.hpp"
#include "metaood/parallel.hpp"
#include "metaood/perf_store.hpp"
#include "metaood/pipeline.hpp"
#include "metaood/rank.hpp"
#include "metaood/rng.hpp"
#include "metaood/selectors.hpp"
#include "metaood/stat_features.hpp"
#include "metaood/wilcoxon.hpp"
