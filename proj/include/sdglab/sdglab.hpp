#pragma once

#include "sdglab/bias.hpp"
#include "sdglab/corpus.hpp"
#include "sdglab/ensemble.hpp"
#include "sdglab/error.hpp"
#include "sdglab/evaluation.hpp"
#include "sdglab/forest.hpp"
#include "sdglab/query.hpp"
#include "sdglab/random.hpp"
#include "sdglab/sdg.hpp"
#include "sdglab/synthgen.hpp"
#include "sdglab/systems.hpp"
#include "sdglab/tokenize.hpp"
