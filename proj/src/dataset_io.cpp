#include "cryoplan/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "cryoplan/rng.hpp"

namespace cryoplan {

namespace {

void check_range(const IntRange& r, int lo, const char* name) {
  if (r.min < lo || r.max < r.min) {
    throw ConfigError(fmt::format("{}: need {} <= min <= max, got [{}, {}]", name, lo, r.min, r.max));
  }
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void GenConfig::validate() const {
  if (n_grids < 1) throw ConfigError("n_grids must be >= 1");
  check_range(squares_per_grid, 1, "squares_per_grid");
  if (total_squares < 0) throw ConfigError("total_squares must be >= 0");
  if (total_squares > 0 && total_squares < n_grids) {
    throw ConfigError("total_squares must be >= n_grids so every grid has a square");
  }
  check_range(patches_per_square, 1, "patches_per_square");
  check_range(holes_per_patch, 1, "holes_per_patch");
  if (!(target_low_fraction > 0.0 && target_low_fraction < 1.0)) {
    throw ConfigError("target_low_fraction must lie in (0, 1)");
  }
  if (!(clustering_strength >= 0.0) || !std::isfinite(clustering_strength)) {
    throw ConfigError("clustering_strength must be finite and >= 0");
  }
  if (!(patch_spread >= 0.0)) throw ConfigError("patch_spread must be >= 0");
  if (!(low_ctf.min > 0.0 && low_ctf.max > low_ctf.min)) throw ConfigError("bad low_ctf range");
  if (!(high_ctf.max > high_ctf.min && high_ctf.min > 0.0)) throw ConfigError("bad high_ctf range");
  if (low_ctf.max > 6.0 || high_ctf.min < 6.0) {
    throw ConfigError("CTF ranges must straddle the 6.0 A low/high threshold");
  }
  if (!(hole_spacing > 0.0)) throw ConfigError("hole_spacing must be > 0");
}

GenConfig GenConfig::y1(std::uint64_t seed) {
  GenConfig cfg;
  cfg.seed = seed;
  cfg.n_grids = 8;
  cfg.total_squares = 31;
  cfg.patches_per_square = {8, 12};
  cfg.holes_per_patch = {10, 16};
  cfg.target_low_fraction = 0.334;
  cfg.clustering_strength = 2.0;
  return cfg;
}

void to_json(nlohmann::json& j, const GenConfig& c) {
  j = nlohmann::json{
      {"seed", c.seed},
      {"n_grids", c.n_grids},
      {"squares_per_grid", {c.squares_per_grid.min, c.squares_per_grid.max}},
      {"total_squares", c.total_squares},
      {"patches_per_square", {c.patches_per_square.min, c.patches_per_square.max}},
      {"holes_per_patch", {c.holes_per_patch.min, c.holes_per_patch.max}},
      {"target_low_fraction", c.target_low_fraction},
      {"clustering_strength", c.clustering_strength},
      {"patch_spread", c.patch_spread},
      {"low_ctf", {c.low_ctf.min, c.low_ctf.max}},
      {"high_ctf", {c.high_ctf.min, c.high_ctf.max}},
      {"hole_spacing", c.hole_spacing},
  };
}

void from_json(const nlohmann::json& j, GenConfig& c) {
  if (!j.is_object()) throw ConfigError("generation config must be a JSON object");
  GenConfig out = c;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "seed") out.seed = v.get<std::uint64_t>();
      else if (key == "n_grids") out.n_grids = v.get<int>();
      else if (key == "squares_per_grid") out.squares_per_grid = {v.at(0).get<int>(), v.at(1).get<int>()};
      else if (key == "total_squares") out.total_squares = v.get<int>();
      else if (key == "patches_per_square") out.patches_per_square = {v.at(0).get<int>(), v.at(1).get<int>()};
      else if (key == "holes_per_patch") out.holes_per_patch = {v.at(0).get<int>(), v.at(1).get<int>()};
      else if (key == "target_low_fraction") out.target_low_fraction = v.get<double>();
      else if (key == "clustering_strength") out.clustering_strength = v.get<double>();
      else if (key == "patch_spread") out.patch_spread = v.get<double>();
      else if (key == "low_ctf") out.low_ctf = {v.at(0).get<double>(), v.at(1).get<double>()};
      else if (key == "high_ctf") out.high_ctf = {v.at(0).get<double>(), v.at(1).get<double>()};
      else if (key == "hole_spacing") out.hole_spacing = v.get<double>();
      else throw ConfigError("unknown generation config key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("generation config key '" + key + "': " + e.what());
    }
  }
  c = out;
}

Dataset generate(const GenConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  std::vector<int> squares_in_grid(static_cast<std::size_t>(cfg.n_grids));
  if (cfg.total_squares > 0) {
    // Every grid gets one square, the rest land uniformly at random.
    std::fill(squares_in_grid.begin(), squares_in_grid.end(), 1);
    for (int i = cfg.n_grids; i < cfg.total_squares; ++i) {
      ++squares_in_grid[rng.below(static_cast<std::uint64_t>(cfg.n_grids))];
    }
  } else {
    for (auto& n : squares_in_grid) n = static_cast<int>(rng.range(cfg.squares_per_grid.min, cfg.squares_per_grid.max));
  }

  struct PatchDraft {
    Id grid, square, patch;
    int holes;
    double latent;
  };
  std::vector<PatchDraft> drafts;
  Id next_square = 0;
  Id next_patch = 0;
  for (Id g = 0; g < squares_in_grid.size(); ++g) {
    for (int s = 0; s < squares_in_grid[g]; ++s) {
      const Id square = next_square++;
      const double square_latent = rng.normal();
      const auto n_patches = rng.range(cfg.patches_per_square.min, cfg.patches_per_square.max);
      for (std::int64_t p = 0; p < n_patches; ++p) {
        const double latent = square_latent + cfg.patch_spread * rng.normal();
        const auto holes = static_cast<int>(rng.range(cfg.holes_per_patch.min, cfg.holes_per_patch.max));
        drafts.push_back(PatchDraft{g, square, next_patch++, holes, latent});
      }
    }
  }

  // Solve mean_h logistic(k z_p(h) + b) = target for b by bisection; the
  // left-hand side is strictly increasing in b.
  const double total_holes = std::accumulate(drafts.begin(), drafts.end(), 0.0,
                                             [](double acc, const PatchDraft& d) { return acc + d.holes; });
  auto expected_low = [&](double bias) {
    double sum = 0.0;
    for (const auto& d : drafts) sum += d.holes * logistic(cfg.clustering_strength * d.latent + bias);
    return sum / total_holes;
  };
  double lo = -60.0;
  double hi = 60.0;
  if (!(expected_low(lo) < cfg.target_low_fraction && expected_low(hi) > cfg.target_low_fraction)) {
    throw GenerationError("cannot calibrate low-CTF bias for target fraction " +
                          std::to_string(cfg.target_low_fraction));
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (expected_low(mid) < cfg.target_low_fraction ? lo : hi) = mid;
  }
  const double bias = 0.5 * (lo + hi);

  std::vector<HoleRecord> records;
  records.reserve(static_cast<std::size_t>(total_holes));
  Id next_hole = 0;
  for (const auto& d : drafts) {
    const double p_low = logistic(cfg.clustering_strength * d.latent + bias);
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d.holes))));
    for (int i = 0; i < d.holes; ++i) {
      const bool low = rng.bernoulli(p_low);
      const double u = rng.uniform();
      const double ctf = low ? cfg.low_ctf.min + u * (cfg.low_ctf.max - cfg.low_ctf.min)
                             : cfg.high_ctf.max - u * (cfg.high_ctf.max - cfg.high_ctf.min);
      const double jx = rng.uniform(-0.05, 0.05) * cfg.hole_spacing;
      const double jy = rng.uniform(-0.05, 0.05) * cfg.hole_spacing;
      const Position pos{(i % cols + 0.5) * cfg.hole_spacing + jx, (i / cols + 0.5) * cfg.hole_spacing + jy};
      records.push_back(HoleRecord{next_hole++, d.grid, d.square, d.patch, pos, ctf});
    }
  }
  return Dataset::from_records(records);
}

void write_csv(const Dataset& ds, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : ds.to_records()) {
    out << fmt::format("{},{},{},{},{},{},{}\n", r.hole_id, r.grid_id, r.square_id, r.patch_id,
                       r.position.x, r.position.y, r.ctf);
  }
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    fields.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return fields;
}

template <class T>
T parse_number(std::string_view field, std::size_t line, const char* column) {
  T value{};
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || field.empty()) {
    throw ParseError(line, fmt::format("column '{}': cannot parse '{}'", column, field));
  }
  return value;
}

}  // namespace

Dataset read_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto strip = [](std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  };
  if (!std::getline(in, line)) throw ParseError(1, "empty file, header required");
  ++line_no;
  strip(line);
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  if (line != kCsvHeader) {
    throw ParseError(1, fmt::format("expected header '{}'", kCsvHeader));
  }
  std::vector<HoleRecord> records;
  std::vector<std::size_t> lines;
  while (std::getline(in, line)) {
    ++line_no;
    strip(line);
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 7) throw ParseError(line_no, fmt::format("expected 7 fields, got {}", f.size()));
    HoleRecord r{};
    r.hole_id = parse_number<Id>(f[0], line_no, "hole_id");
    r.grid_id = parse_number<Id>(f[1], line_no, "grid_id");
    r.square_id = parse_number<Id>(f[2], line_no, "square_id");
    r.patch_id = parse_number<Id>(f[3], line_no, "patch_id");
    r.position.x = parse_number<double>(f[4], line_no, "x");
    r.position.y = parse_number<double>(f[5], line_no, "y");
    r.ctf = parse_number<double>(f[6], line_no, "ctf");
    records.push_back(r);
    lines.push_back(line_no);
  }
  try {
    return Dataset::from_records(records);
  } catch (const RecordError& e) {
    throw ParseError(lines.at(e.row() - 1), e.what());
  }
}

void save(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_csv(ds, out);
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Dataset load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_csv(in);
}

std::pair<Dataset, Dataset> split(const Dataset& ds, SplitSpec spec, std::uint64_t seed) {
  if (spec.first < 0 || spec.second < 0 || spec.first + spec.second <= 0) {
    throw ConfigError("split ratio parts must be non-negative with a positive sum");
  }
  const std::size_t n = ds.square_count();
  if (n < 2) throw ConfigError("split needs at least 2 squares, dataset has " + std::to_string(n));

  const std::size_t sum = static_cast<std::size_t>(spec.first + spec.second);
  std::size_t n_first = n * static_cast<std::size_t>(spec.first) / sum;
  const std::size_t n_second = n * static_cast<std::size_t>(spec.second) / sum;
  const std::size_t remainder = n - n_first - n_second;
  if (spec.first >= spec.second) n_first += remainder;

  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  std::vector<std::uint8_t> in_first(n, 0);
  for (std::size_t i = 0; i < n_first; ++i) in_first[order[i]] = 1;

  std::vector<HoleRecord> a, b;
  const auto records = ds.to_records();
  for (std::size_t h = 0; h < records.size(); ++h) {
    (in_first[ds.lineage(static_cast<Index>(h)).square] ? a : b).push_back(records[h]);
  }
  return {Dataset::from_records(a), Dataset::from_records(b)};
}

SplitSpec parse_split(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ConfigError("split ratio must look like '2:1'");
  SplitSpec s;
  const auto a = text.substr(0, colon);
  const auto b = text.substr(colon + 1);
  auto r1 = std::from_chars(a.data(), a.data() + a.size(), s.first);
  auto r2 = std::from_chars(b.data(), b.data() + b.size(), s.second);
  if (r1.ec != std::errc{} || r2.ec != std::errc{} || r1.ptr != a.data() + a.size() ||
      r2.ptr != b.data() + b.size() || s.first < 0 || s.second < 0 || s.first + s.second == 0) {
    throw ConfigError("bad split ratio '" + std::string(text) + "'");
  }
  return s;
}

}  // namespace cryoplan
