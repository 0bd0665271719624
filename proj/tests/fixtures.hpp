#pragma once

// Small hand-built datasets shared by the unit and acceptance tests.

#include <algorithm>
#include <functional>
#include <map>
#include <vector>

#include "cryoplan/atlas.hpp"
#include "cryoplan/classifier.hpp"
#include "cryoplan/rng.hpp"

namespace fixtures {

using cryoplan::Dataset;
using cryoplan::HoleRecord;
using cryoplan::Id;

// Regular hierarchy; ids are 1-based and assigned depth first, so hole index
// order equals generation order. `ctf(g, s, p, h)` picks each hole's CTF.
inline Dataset regular(int grids, int squares, int patches, int holes,
                       const std::function<double(int, int, int, int)>& ctf) {
  std::vector<HoleRecord> rows;
  Id square_id = 0, patch_id = 0, hole_id = 0;
  for (int g = 0; g < grids; ++g) {
    for (int s = 0; s < squares; ++s) {
      ++square_id;
      for (int p = 0; p < patches; ++p) {
        ++patch_id;
        for (int h = 0; h < holes; ++h) {
          ++hole_id;
          rows.push_back(HoleRecord{hole_id, static_cast<Id>(g + 1), square_id, patch_id,
                                    {100.0 * h, 100.0 * p}, ctf(g, s, p, h)});
        }
      }
    }
  }
  return Dataset::from_records(rows);
}

// 2 grids x 2 squares x 2 patches x 5 holes; quality falls with grid, square
// and patch position so the hierarchy carries real signal.
inline Dataset tiny() {
  return regular(2, 2, 2, 5, [](int g, int s, int p, int h) {
    const int rank = 4 * g + 2 * s + p;  // 0 best .. 7 worst
    const int lows = 5 - std::min(5, rank);
    return h < lows ? 4.0 + 0.1 * h : 12.0 + h;
  });
}

// Every hole low.
inline Dataset all_low(int grids, int squares, int patches, int holes) {
  return regular(grids, squares, patches, holes, [](int, int, int, int) { return 4.0; });
}

// Predictions that copy an explicit label vector.
inline cryoplan::PredictionTable labels(const std::vector<bool>& low) {
  std::vector<cryoplan::Prediction> rows;
  for (bool l : low) rows.push_back({l, 1.0});
  return cryoplan::PredictionTable(rows);
}

inline cryoplan::PredictionTable truth(const Dataset& ds) {
  std::vector<bool> low;
  for (const auto& h : ds.holes()) low.push_back(cryoplan::is_low(h));
  return labels(low);
}

// Small atlas with `patches` patches spread over squares and grids, each
// holding a random number of low holes among 4.
inline Dataset random_atlas(cryoplan::Rng& rng, int patches) {
  std::vector<HoleRecord> rows;
  Id hole = 0;
  for (int p = 1; p <= patches; ++p) {
    const auto square = static_cast<Id>(rng.range(1, 3) + 3 * (p % 2));
    const Id grid = square > 3 ? 2 : 1;
    const int lows = static_cast<int>(rng.range(0, 4));
    for (int h = 0; h < 4; ++h) rows.push_back({++hole, grid, square, static_cast<Id>(p), {0, 0}, h < lows ? 4.0 : 9.0});
  }
  // Patches keep the square they were first assigned to.
  std::map<Id, Id> sq;
  for (auto& r : rows) {
    auto [it, fresh] = sq.emplace(r.patch_id, r.square_id);
    r.square_id = it->second;
    r.grid_id = r.square_id > 3 ? 2 : 1;
  }
  return Dataset::from_records(rows);
}

}  // namespace fixtures
