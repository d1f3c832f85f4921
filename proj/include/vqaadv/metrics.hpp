#pragma once

#include "metrics/accuracy.hpp"
#include "metrics/aggregate.hpp"
#include "metrics/bertscore.hpp"
#include "metrics/bleu.hpp"
#include "metrics/judge.hpp"
#include "metrics/meteor.hpp"
#include "metrics/porter.hpp"
#include "metrics/rouge.hpp"
