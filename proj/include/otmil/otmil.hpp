#pragma once

#include "otmil/numkit.hpp"
#include "otmil/data.hpp"
#include "otmil/labeling.hpp"
#include "otmil/model.hpp"
#include "otmil/eval.hpp"
#include "otmil/baselines.hpp"
#include "otmil/trainer.hpp"
