#pragma once

#include "helltrust/baselines.hpp"
#include "helltrust/config.hpp"
#include "helltrust/dataset.hpp"
#include "helltrust/error.hpp"
#include "helltrust/eval.hpp"
#include "helltrust/factor_model.hpp"
#include "helltrust/knn.hpp"
#include "helltrust/models.hpp"
#include "helltrust/normal.hpp"
#include "helltrust/predictor.hpp"
#include "helltrust/random.hpp"
#include "helltrust/trust_extract.hpp"
