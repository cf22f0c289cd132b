#pragma once

#include <ostream>
#include <span>
#include <string>

#include "l2l/config.hpp"
#include "l2l/eval.hpp"
#include "l2l/learned_attack.hpp"
#include "l2l/nets.hpp"

namespace l2l {

// Exit codes: 0 success, 1 domain error, 2 usage error.
int dispatch(std::span<const std::string> args, std::ostream& out, std::ostream& err);

// The evaluation battery behind `eval`. `attacker` and `surrogate` may be null.
EvalReport evaluate_model(const RunConfig& cfg, const ClassifierNet& net,
                          const AttackerNet* attacker, const ClassifierNet* surrogate,
                          const Dataset& test, bool fast);

}  // namespace l2l
