#pragma once

#include "miso/analysis.hpp"
#include "miso/ast.hpp"
#include "miso/compile.hpp"
#include "miso/diagnostics.hpp"
#include "miso/driver.hpp"
#include "miso/eval.hpp"
#include "miso/lexer.hpp"
#include "miso/parser.hpp"
#include "miso/replicate.hpp"
#include "miso/schedule.hpp"
#include "miso/snapshot.hpp"
#include "miso/state.hpp"
#include "miso/token.hpp"
#include "miso/typecheck.hpp"
#include "miso/value.hpp"
