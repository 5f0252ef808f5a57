#pragma once

// Deterministic demo assignment and synthetic corpora shipped under data/.

#include <string>
#include <vector>

#include "csm/domain.hpp"
#include "csm/replay.hpp"
#include "csm/views.hpp"

namespace csm {

// Three phases, 104 correct-flow actions and 30 distractors.
AssignmentConfig demo_config();

// 87 students s01..s87. s22 is the only one who finishes without a relevant
// error; s13 errs only in the first phase; s27 errs in every phase.
std::vector<StudentLog> demo_corpus(const AssignmentConfig& config);

// 30 careful students (g01..g30) and 30 that go wrong early (b01..b30).
std::vector<StudentLog> two_population_corpus(const AssignmentConfig& config);

// 85 students: 68 starting in 2013-2015 and 17 in 2016. Exactly 45 of the
// first and 7 of the second period skip f1t16.
std::vector<StudentLog> two_period_corpus(const AssignmentConfig& config);
ChangeMap two_period_changes();

// Raw action streams behind demo_corpus, for replay tests.
std::vector<std::vector<RawAction>> demo_raw_actions(const AssignmentConfig& config);

}  // namespace csm
