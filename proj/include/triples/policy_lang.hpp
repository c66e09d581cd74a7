#pragma once

#include "triples/lang/ast.hpp"
#include "triples/lang/checker.hpp"
#include "triples/lang/diagnostic.hpp"
#include "triples/lang/interpreter.hpp"
#include "triples/lang/parser.hpp"
#include "triples/lang/registry.hpp"
