#pragma once

// Synthetic dataset generation, CSV persistence and square-level splitting.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <utility>

#include <json.hpp>

#include "cryoplan/atlas.hpp"

namespace cryoplan {

struct IntRange {
  int min = 0;
  int max = 0;
  friend bool operator==(const IntRange&, const IntRange&) = default;
};

struct RealRange {
  double min = 0.0;
  double max = 0.0;
  friend bool operator==(const RealRange&, const RealRange&) = default;
};

// Hole quality follows a two-level latent field: each square draws a quality
// z_s ~ N(0,1), each patch z_p ~ N(z_s, patch_spread^2), and each hole is low
// CTF with probability logistic(clustering_strength * z_p + bias). The bias is
// solved for so that the expected low fraction equals target_low_fraction.
struct GenConfig {
  std::uint64_t seed = 0;
  int n_grids = 8;
  IntRange squares_per_grid{3, 5};
  int total_squares = 0;  // > 0 overrides squares_per_grid
  IntRange patches_per_square{8, 12};
  IntRange holes_per_patch{10, 16};
  double target_low_fraction = 0.334;
  double clustering_strength = 2.0;
  double patch_spread = 0.5;
  RealRange low_ctf{3.0, 6.0};    // [min, max)
  RealRange high_ctf{6.0, 25.0};  // (min, max]
  double hole_spacing = 100.0;    // lattice pitch in patch-image pixels

  void validate() const;

  // 31 squares, ~4000 holes, 33.4% low CTF.
  static GenConfig y1(std::uint64_t seed = 0);

  friend bool operator==(const GenConfig&, const GenConfig&) = default;
};

void to_json(nlohmann::json& j, const GenConfig& cfg);
void from_json(const nlohmann::json& j, GenConfig& cfg);

Dataset generate(const GenConfig& cfg);

// CSV: hole_id,grid_id,square_id,patch_id,x,y,ctf with a mandatory header.
inline constexpr const char* kCsvHeader = "hole_id,grid_id,square_id,patch_id,x,y,ctf";

void write_csv(const Dataset& ds, std::ostream& out);
Dataset read_csv(std::istream& in);

void save(const Dataset& ds, const std::filesystem::path& path);
Dataset load(const std::filesystem::path& path);

struct SplitSpec {
  int first = 2;
  int second = 1;
};

// Partitions squares (not holes) between the two halves. Part sizes are
// floor(n * ratio / sum); the remainder goes to the larger ratio.
std::pair<Dataset, Dataset> split(const Dataset& ds, SplitSpec spec, std::uint64_t seed);

SplitSpec parse_split(std::string_view text);  // "2:1"

}  // namespace cryoplan
