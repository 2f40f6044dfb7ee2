#pragma once

#include "lureid/data.hpp"
#include "lureid/errors.hpp"
#include "lureid/ident.hpp"
#include "lureid/io.hpp"
#include "lureid/kernel.hpp"
#include "lureid/linalg.hpp"
#include "lureid/model.hpp"
#include "lureid/optimize.hpp"
#include "lureid/pipeline.hpp"
#include "lureid/rng.hpp"
