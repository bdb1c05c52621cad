#pragma once

#include "core.hpp"
#include "util.hpp"
#include "ingestion.hpp"
#include "visits.hpp"
#include "imputation.hpp"
#include "classifiers.hpp"
#include "evaluation.hpp"
#include "synth.hpp"
#include "report.hpp"
