#pragma once

#include "array3.hpp"
#include "array_file.hpp"
#include "blockwise.hpp"
#include "disjoint_set.hpp"
#include "errors.hpp"
#include "fixtures.hpp"
#include "grid.hpp"
#include "labeling.hpp"
#include "store.hpp"
#include "verify.hpp"
