#pragma once

#include "transmode/baselines.hpp"
#include "transmode/code_tables.hpp"
#include "transmode/common.hpp"
#include "transmode/evaluation.hpp"
#include "transmode/experiment.hpp"
#include "transmode/feature_matrix.hpp"
#include "transmode/feature_selection.hpp"
#include "transmode/llm_backend.hpp"
#include "transmode/narrative.hpp"
#include "transmode/prompting.hpp"
#include "transmode/survey_data.hpp"
#include "transmode/synthetic.hpp"
#include "transmode/tree.hpp"
