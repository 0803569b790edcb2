#include "procan/curriculum.hpp"

#include <algorithm>

#include "procan/errors.hpp"

namespace procan {

std::string to_string(DifficultyCriterion c) {
  switch (c) {
    case DifficultyCriterion::Rating: return "rating";
    case DifficultyCriterion::Diameter: return "diameter";
    case DifficultyCriterion::None: return "none";
  }
  return "?";
}

DifficultyCriterion parse_criterion(const std::string& s) {
  if (s == "rating") return DifficultyCriterion::Rating;
  if (s == "diameter") return DifficultyCriterion::Diameter;
  if (s == "none") return DifficultyCriterion::None;
  throw ConfigError("curriculum criterion must be rating, diameter or none, got '" + s + "'");
}

std::string to_string(Difficulty d) { return d == Difficulty::Easy ? "easy" : "hard"; }

Difficulty classify(const NoduleRecord& record, DifficultyCriterion criterion) {
  switch (criterion) {
    case DifficultyCriterion::Rating: {
      if (!record.median_rating) throw DataError("record '" + record.id + "' has no rating for the rating criterion");
      const int r = *record.median_rating;
      if (r == 3) throw DataError("record '" + record.id + "' has median rating 3, which must be excluded upstream");
      if (r < 1 || r > 5) throw DataError("record '" + record.id + "' has rating " + std::to_string(r));
      return r == 1 || r == 5 ? Difficulty::Easy : Difficulty::Hard;
    }
    case DifficultyCriterion::Diameter: {
      const double d = record.diameter_mm;
      if (!(d > 0.0)) throw DataError("record '" + record.id + "' has a non-positive diameter");
      return d >= 5.0 && d <= 12.0 ? Difficulty::Hard : Difficulty::Easy;
    }
    case DifficultyCriterion::None: return Difficulty::Easy;
  }
  return Difficulty::Easy;
}

Partition partition(const std::vector<NoduleRecord>& records, DifficultyCriterion criterion) {
  Partition p;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (classify(records[i], criterion) == Difficulty::Easy) p.easy.push_back(i);
    p.full.push_back(i);
  }
  return p;
}

bool should_stop(const std::vector<double>& history) {
  const std::size_t n = history.size();
  if (n < 4) return false;
  return history[n - 1] < std::min({history[n - 2], history[n - 3], history[n - 4]});
}

}  // namespace procan
