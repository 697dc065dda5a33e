// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "xhy/corpus/saying.hpp"
#include "xhy/corpus/segmenter.hpp"

namespace xhy::corpus {

// Subject of a riddle clause. The riddle is segmented and tagged; the
// subject is the first nominal run before the first predicate verb, moved to
// the head noun when followed by 的 + noun ("阎王的蒲扇" -> "蒲扇"). Falls back
// to the first noun anywhere, then to the first token.
std::string extract_subject(std::string_view riddle, const Segmenter& segmenter);

// Fills subject (via extract_subject) where absent and assigns ids 0, 1, ...
// in corpus order within each subject group.
void assign_subjects(std::vector<AllegoricalSaying>& sayings, const Segmenter& segmenter);

}  // namespace xhy::corpus
