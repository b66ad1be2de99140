#pragma once

#include <string>

#include "cfa/cps_ast.hpp"

namespace cfa {

/// Converts a direct-style program in the supported Scheme-like subset
/// (define, application, variable, integer literal, lambda, begin, if) into
/// CPS source text. Transform-introduced continuations use the `kappa`
/// keyword; user lambdas stay `lambda` and receive an extra final
/// continuation parameter. The final expression's value is passed to `halt`.
///
/// `if` is Church-style: the condition value is applied to two zero-argument
/// continuation thunks, so conditions must evaluate to two-argument
/// procedures that invoke one of their thunks. The subset has no primitive
/// operations that could produce any other kind of boolean.
std::string cps_convert_to_text(const std::string& direct_source);

/// Convenience wrapper: convert and parse.
CpsProgramPtr cps_convert(const std::string& direct_source);

}  // namespace cfa
