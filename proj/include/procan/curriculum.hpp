#pragma once

#include <string>
#include <vector>

#include "procan/datapipe.hpp"

namespace procan {

enum class DifficultyCriterion { Rating, Diameter, None };
enum class Difficulty { Easy, Hard };

std::string to_string(DifficultyCriterion c);
DifficultyCriterion parse_criterion(const std::string& s);
std::string to_string(Difficulty d);

/// Rating: easy iff the median rating is 1 or 5. Diameter: hard iff
/// 5 mm ≤ d ≤ 12 mm. None: everything is easy.
Difficulty classify(const NoduleRecord& record, DifficultyCriterion criterion);

/// Indices into the input: `easy` are the records classified easy, `full` is every record.
struct Partition {
  std::vector<std::size_t> easy;
  std::vector<std::size_t> full;
};

Partition partition(const std::vector<NoduleRecord>& records, DifficultyCriterion criterion);

/// True once the newest validation accuracy is strictly below each of the three before it.
bool should_stop(const std::vector<double>& history);

}  // namespace procan
